#pragma once

#include <stdexcept>
#include <string>

namespace regimealloc {

/// Input or configuration violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed on otherwise valid input
/// (non-convergence, singular system, degenerate spectrum).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an asset has zero sample variance.
class DegenerateAssetError : public ValidationError {
public:
    DegenerateAssetError(std::size_t asset, const std::string& what)
        : ValidationError(what), asset_(asset) {}
    std::size_t asset() const noexcept { return asset_; }

private:
    std::size_t asset_;
};

}  // namespace regimealloc
