#pragma once
// Exception types shared by every module.

#include <stdexcept>
#include <string>
#include <vector>

namespace selfreg {

// Malformed scenario text (not a syntactically valid document, or the wrong
// shape at the top level).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A well-formed document that breaks one or more model invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "scenario validation failed";
        for (const auto& s : v) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

// Query against an id that does not exist, or a violated call precondition.
class LookupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An internal invariant broke while an episode was running.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace selfreg
