#pragma once
// Typed field readers that record violations instead of throwing, so a
// single validation pass can report every problem in a document.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace selfreg::detail {

using json = nlohmann::json;
using Violations = std::vector<std::string>;

inline std::optional<double> read_number(const json& obj, const std::string& key,
                                         const std::string& where, Violations& out,
                                         std::optional<double> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (!fallback) out.push_back(where + ": missing field '" + key + "'");
        return fallback;
    }
    if (!it->is_number()) {
        out.push_back(where + ": field '" + key + "' must be a number");
        return std::nullopt;
    }
    return it->get<double>();
}

inline std::optional<long long> read_integer(const json& obj, const std::string& key,
                                             const std::string& where, Violations& out,
                                             std::optional<long long> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (!fallback) out.push_back(where + ": missing field '" + key + "'");
        return fallback;
    }
    if (!it->is_number_integer()) {
        out.push_back(where + ": field '" + key + "' must be an integer");
        return std::nullopt;
    }
    return it->get<long long>();
}

inline std::optional<std::string> read_string(const json& obj, const std::string& key,
                                              const std::string& where, Violations& out,
                                              std::optional<std::string> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (!fallback) out.push_back(where + ": missing field '" + key + "'");
        return fallback;
    }
    if (!it->is_string()) {
        out.push_back(where + ": field '" + key + "' must be a string");
        return std::nullopt;
    }
    return it->get<std::string>();
}

inline std::optional<bool> read_bool(const json& obj, const std::string& key,
                                     const std::string& where, Violations& out, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    if (!it->is_boolean()) {
        out.push_back(where + ": field '" + key + "' must be a boolean");
        return std::nullopt;
    }
    return it->get<bool>();
}

}  // namespace selfreg::detail
