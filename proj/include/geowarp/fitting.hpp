#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/models.hpp"
#include "geowarp/parallel.hpp"

namespace geowarp {

/// Uniform histogram over a 1-D or 2-D parameter box. Each cell keeps its vote count and the
/// running sum of the samples that landed in it, so the winner's mean is exact.
class HoughAccumulator {
public:
    HoughAccumulator(std::vector<Interval> bounds, int cells_per_dim);

    int dims() const noexcept { return static_cast<int>(bounds_.size()); }
    int cells_per_dim() const noexcept { return cells_; }
    const Interval& bounds(int dim) const { return bounds_[dim]; }
    double cell_width(int dim) const { return bounds_[dim].width() / cells_; }

    /// Adds a sample. Returns false (and records nothing) when any component is outside its
    /// bounds or not finite.
    bool vote(std::span<const double> sample);

    /// Merges another accumulator with identical geometry.
    void merge(const HoughAccumulator& other);

    std::uint64_t count(std::size_t cell) const { return counts_[cell]; }
    std::uint64_t total_votes() const noexcept { return total_; }
    std::size_t cell_count() const noexcept { return counts_.size(); }

    /// Most-voted cell; ties go to the cell whose centre is closest to the origin, then to the
    /// lower index.
    std::size_t winner() const;

    /// Mean of the samples voted into `cell`, one value per dimension.
    std::array<double, 2> cell_mean(std::size_t cell) const;
    std::array<double, 2> cell_centre(std::size_t cell) const;

private:
    std::vector<Interval> bounds_;
    int cells_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::array<double, 2>> sums_;
    std::uint64_t total_ = 0;
};

struct FitResult {
    DistortionParams params;
    std::uint64_t votes = 0;
    double inlier_fraction = 0.0;  // winning votes / usable estimates
    double refit_epe = 0.0;        // input flow vs regenerated flow, over valid pixels
    std::uint64_t estimates = 0;   // usable (finite, non-degenerate) estimates before range culling
};

struct FitOptions {
    int cells = 100;
    /// Horizontal partner offset for perspective pairs; vertical step for wave triples.
    int pair_offset = 8;
    std::uint64_t min_estimates = 100;
    Execution execution = Execution::Parallel;
};

/// Hough voting of per-pixel parameter estimates. Throws InsufficientData when fewer than
/// `min_estimates` estimates fall inside the range.
FitResult hough_fit(const FlowField& flow, DistortionType type, const ParamRange& ranges,
                    const FitOptions& opts = {});

/// Smooth flow of the fitted model at any resolution.
FlowField refine_flow(const FitResult& fit, int width, int height);

/// Fits all six models and orders them by refit EPE (ties in canonical type order). Types whose
/// fit fails are left out. Throws Unidentifiable when every fit fails.
std::vector<FitResult> identify_model(const FlowField& flow, const ParamRange& ranges,
                                      const FitOptions& opts = {});

}  // namespace geowarp
