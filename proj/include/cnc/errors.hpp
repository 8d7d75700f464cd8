#ifndef CNC_ERRORS_HPP
#define CNC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// Batch too small for the requested neighborhood, or contains non-finite values.
class DegenerateBatch : public Error {
public:
    using Error::Error;
};

class DegenerateDataset : public Error {
public:
    using Error::Error;
};

/// Cluster with positive cut and zero volume. Cannot happen on a symmetric graph.
class DegenerateCluster : public Error {
public:
    using Error::Error;
};

/// Every expected cluster volume fell below the clamp.
class AllVolumesZero : public Error {
public:
    explicit AllVolumesZero(const std::string& what, long step = -1)
        : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(const std::string& what, long step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class NonFiniteActivation : public Error {
public:
    using Error::Error;
};

class InstanceTooLarge : public Error {
public:
    using Error::Error;
};

class EmptySplit : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset, labels or checkpoint file.
class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace cnc

#endif  // CNC_ERRORS_HPP
