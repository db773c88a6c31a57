#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/fitting.hpp"
#include "geowarp/models.hpp"
#include "geowarp/resampler.hpp"

namespace geowarp {

/// Bilinear resize of a flow field with each vector component scaled by the per-axis ratio
/// (W_out - 1) / (W_in - 1), so that corner pixels stay attached to corners.
FlowField resize_flow(const FlowField& flow, int width, int height);

/// Applies a reference distortion to another image: D(p) = target(p + F(p)) with the reference
/// flow resized to the target. Pixels landing outside the target are masked invalid.
ImageBuffer transfer(const FlowField& reference_flow, const ImageBuffer& target);

/// resample(image, gain * flow). gain 1 corrects, 0 is the identity, negative exaggerates.
ImageBuffer exaggerate(const ImageBuffer& image, const FlowField& flow, double gain,
                       const ResampleOptions& opts = {});

/// What a flow source knows about an image: the flow and, optionally, its distortion type.
struct FlowEstimate {
    FlowField flow;
    std::optional<DistortionType> type;
};

/// Called once per round with the current image and the 0-based round number.
using FlowProvider = std::function<FlowEstimate(const ImageBuffer& image, int round)>;

struct IterativeOptions {
    int rounds = 2;
    /// A round whose fitted flow is shorter than this on average ends the loop uncorrected.
    double min_mean_magnitude = 0.5;
    ParamRange ranges = ParamRange::defaults();
    FitOptions fit;
    ResampleOptions resample;
};

struct IterativeResult {
    ImageBuffer image;
    std::vector<FitResult> fits;  // one per round attempted
    bool stopped_early = false;
};

/// One round: fit (known type or identify_model) -> refine at image size -> resample.
/// Rounds stop early on a negligible fitted flow. Provider or fitting failures propagate;
/// `partial` (when given) then holds the rounds completed so far.
IterativeResult correct_iterative(const ImageBuffer& image, const FlowProvider& provider,
                                  const IterativeOptions& opts = {},
                                  IterativeResult* partial = nullptr);

}  // namespace geowarp
