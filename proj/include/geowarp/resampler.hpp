#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/parallel.hpp"

namespace geowarp {

enum class BoundaryPolicy { MarkInvalid, Clamp };

struct ResampleOptions {
    int max_iterations = 20;
    double tolerance = 1e-3;  // pixels
    bool use_derivative_init = true;
    BoundaryPolicy boundary = BoundaryPolicy::MarkInvalid;
    Execution execution = Execution::Parallel;

    void validate() const;
};

/// Below this |1 + d| the finite-difference initialization is abandoned for the plain one.
inline constexpr double kDerivativeInitFloor = 1e-3;

/// First estimate of the preimage of q: each axis solves the local linearization
/// x' = x - f(q) / (1 + f(q + e) - f(q)) built from the one-pixel forward difference
/// (backward difference on the last column/row).
Vec2 init_estimate(const FlowField& flow, int qx, int qy);

struct PixelSolution {
    Vec2 p;                  // preimage estimate in flow pixel coordinates
    int iterations = 0;      // fixed-point steps evaluated
    bool converged = false;  // last step shorter than tolerance
    bool inside = true;      // p inside [0,W-1]x[0,H-1]
    double residual = 0.0;   // |p + f(p) - q|
};

/// Solves p + f(p) = q for one destination pixel by iterating p <- q - f(p).
PixelSolution solve_pixel(const FlowField& flow, int qx, int qy, const ResampleOptions& opts);

struct ResampleReport {
    static constexpr std::array<double, 8> kResidualEdges = {1e-3, 1e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0};

    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> iterations;  // per pixel, row-major
    double fraction_converged = 0.0;
    double fraction_invalid = 0.0;
    double mean_iterations = 0.0;
    /// Bin k counts residuals in [edge[k-1], edge[k]); the last bin is [5, inf).
    std::array<std::uint64_t, kResidualEdges.size() + 1> residual_histogram{};

    std::uint64_t histogram_total() const;
};

struct BackwardMap {
    std::vector<PixelSolution> solutions;  // row-major
    ResampleReport report;
};

/// Per-pixel preimages for every destination pixel of the flow's grid.
BackwardMap solve_backward_map(const FlowField& flow, const ResampleOptions& opts);

struct ResampleResult {
    ImageBuffer image;
    ResampleReport report;
};

/// Corrected image: out(q) = image(p) with p + f(p) = q, bilinear color lookup.
ResampleResult resample(const ImageBuffer& image, const FlowField& flow, const ResampleOptions& opts = {});

}  // namespace geowarp
