#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument (grid bounds, radii, masks, ...) was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two fields or contexts refer to different parameter grids.
class GridMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// The first fundamental form degenerated (EG - F^2 <= 0) at one or more nodes.
class DegenerateMetric : public Error {
public:
    DegenerateMetric(const std::string& what, std::vector<std::size_t> nodes)
        : Error(what), nodes_(std::move(nodes)) {}

    const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
    std::vector<std::size_t> nodes_;
};

/// The Jacobi operator is (numerically) singular on the requested patch, or an
/// eigen-iteration failed to converge.
class SpectralDegeneracy : public Error {
public:
    using Error::Error;
};

/// A node set could not be charted over the cover of the punctured plane.
class NotChartable : public Error {
public:
    NotChartable(const std::string& what, std::vector<std::size_t> nodes)
        : Error(what), nodes_(std::move(nodes)) {}

    const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
    std::vector<std::size_t> nodes_;
};

}  // namespace cmc
