#ifndef LAFA_ERRORS_HPP
#define LAFA_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lafa {

/// Operand dimensions do not conform.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller-side precondition (positivity, convergence, parameter range) failed.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// LU factorization met a pivot below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(const std::string& what, double pivot)
        : std::runtime_error(what), pivot_(pivot) {}
    double pivot() const noexcept { return pivot_; }

private:
    double pivot_;
};

/// A latent component has zero norm on its W or H side.
class DegenerateComponentError : public std::runtime_error {
public:
    DegenerateComponentError(const std::string& what, std::size_t component)
        : std::runtime_error(what), component_(component) {}
    std::size_t component() const noexcept { return component_; }

private:
    std::size_t component_;
};

/// Malformed matrix file; the message carries the line or byte position.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lafa

#endif  // LAFA_ERRORS_HPP
