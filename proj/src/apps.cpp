#include "geowarp/apps.hpp"

#include <array>

namespace geowarp {

FlowField resize_flow(const FlowField& flow, int width, int height) {
    if (width < 1 || height < 1) throw InvalidInput("resize_flow: bad target size");
    if (width == flow.width() && height == flow.height()) return flow;
    const double rx = width > 1 && flow.width() > 1 ? (flow.width() - 1.0) / (width - 1.0) : 0.0;
    const double ry = height > 1 && flow.height() > 1 ? (flow.height() - 1.0) / (height - 1.0) : 0.0;
    const double vx = rx > 0.0 ? 1.0 / rx : 1.0;
    const double vy = ry > 0.0 ? 1.0 / ry : 1.0;
    FlowField out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec2 v = sample_flow_clamped(flow, {x * rx, y * ry});
            out.at(x, y) = {static_cast<float>(v.x * vx), static_cast<float>(v.y * vy)};
        }
    }
    return out;
}

ImageBuffer transfer(const FlowField& reference_flow, const ImageBuffer& target) {
    const FlowField flow = resize_flow(reference_flow, target.width(), target.height());
    ImageBuffer out(target.width(), target.height(), target.channels());
    std::vector<std::uint8_t> valid(out.pixel_count(), 1);
    bool any_invalid = false;
    std::array<float, 4> color{};
    for (int y = 0; y < target.height(); ++y) {
        for (int x = 0; x < target.width(); ++x) {
            const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
            if (!sample_image_bilinear(target, p + flow.vec(x, y),
                                       std::span<float>(color.data(), target.channels()))) {
                valid[static_cast<std::size_t>(y) * target.width() + x] = 0;
                any_invalid = true;
                continue;
            }
            for (int c = 0; c < target.channels(); ++c) out.at(x, y, c) = color[c];
        }
    }
    if (any_invalid) out.set_mask(std::move(valid));
    return out;
}

ImageBuffer exaggerate(const ImageBuffer& image, const FlowField& flow, double gain,
                       const ResampleOptions& opts) {
    return resample(image, scale_flow(flow, gain), opts).image;
}

IterativeResult correct_iterative(const ImageBuffer& image, const FlowProvider& provider,
                                  const IterativeOptions& opts, IterativeResult* partial) {
    if (opts.rounds < 1) throw InvalidInput("correct_iterative: rounds must be >= 1");
    IterativeResult result{image, {}, false};
    try {
        for (int round = 0; round < opts.rounds; ++round) {
            const FlowEstimate estimate = provider(result.image, round);
            FitResult fit = estimate.type
                                ? hough_fit(estimate.flow, *estimate.type, opts.ranges, opts.fit)
                                : identify_model(estimate.flow, opts.ranges, opts.fit).front();
            const FlowField refined = refine_flow(fit, result.image.width(), result.image.height());
            result.fits.push_back(fit);
            if (mean_magnitude(refined) < opts.min_mean_magnitude) {
                result.stopped_early = true;
                break;
            }
            result.image = resample(result.image, refined, opts.resample).image;
        }
    } catch (...) {
        if (partial) *partial = result;
        throw;
    }
    return result;
}

}  // namespace geowarp
