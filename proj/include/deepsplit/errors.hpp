#pragma once

#include <stdexcept>
#include <string>

namespace deepsplit {

/// Dimension mismatch between a parameter slice, an input and a layer.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in a forward pass or a simulated path.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training diverged; carries the timestep and iteration where it happened.
class TrainingError : public std::runtime_error {
public:
    TrainingError(int step, long iteration, const std::string& what)
        : std::runtime_error(what), step_(step), iteration_(iteration) {}

    int step() const noexcept { return step_; }
    long iteration() const noexcept { return iteration_; }

private:
    int step_;
    long iteration_;
};

/// Malformed configuration text or flag.
class ParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A reference solver could not produce a trustworthy value.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace deepsplit
