#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace septensor {

/// Shapes or ranks of the operands do not fit together.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Wrong number of axes / operands (e.g. a decomposition with d < 2).
class ArityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Reference tensor has zero norm, so a relative error is undefined.
class DegenerateReferenceError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Misuse of the reverse-mode tape (foreign nodes, double backward, ...).
class TapeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite loss or gradient during training.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace septensor
