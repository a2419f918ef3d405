#ifndef VSG_ERRORS_HPP
#define VSG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vsg {

// Bayes update has no mass on either hypothesis (e.g. q = qbar = 0).
class DegenerateEvidenceError : public std::domain_error {
public:
    explicit DegenerateEvidenceError(const std::string& what)
        : std::domain_error(what) {}
};

// A stated precondition of a closed-form equilibrium does not hold.
class ConditionError : public std::domain_error {
public:
    explicit ConditionError(const std::string& what)
        : std::domain_error(what) {}
};

// Instance/profile file failed schema validation.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what)
        : std::runtime_error(what) {}
};

}  // namespace vsg

#endif
