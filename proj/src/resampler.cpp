#include "geowarp/resampler.hpp"

#include <algorithm>
#include <cmath>

namespace geowarp {

void ResampleOptions::validate() const {
    if (max_iterations < 1) throw InvalidInput("resample: max_iterations must be >= 1");
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
        throw InvalidInput("resample: tolerance must be positive");
    }
}

namespace {

// One axis of the linearized first step. `here` and `next` are the flow component at q and
// at its neighbour along the axis; `forward` is false when the neighbour precedes q.
double linearized_step(double q, double here, double neighbour, bool forward) {
    const double derivative = forward ? neighbour - here : here - neighbour;
    const double denom = 1.0 + derivative;
    if (std::abs(denom) < kDerivativeInitFloor) return q - here;
    return q - here / denom;
}

bool in_domain(Vec2 p, const FlowField& f) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= f.width() - 1 && p.y <= f.height() - 1;
}

std::size_t histogram_bin(double residual) {
    const auto& edges = ResampleReport::kResidualEdges;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (residual < edges[k]) return k;
    }
    return edges.size();
}

}  // namespace

Vec2 init_estimate(const FlowField& flow, int qx, int qy) {
    const Vec2 here = flow.vec(qx, qy);
    Vec2 p{static_cast<double>(qx) - here.x, static_cast<double>(qy) - here.y};
    if (flow.width() > 1) {
        const bool fwd = qx + 1 < flow.width();
        const double nb = flow.vec(fwd ? qx + 1 : qx - 1, qy).x;
        p.x = linearized_step(qx, here.x, nb, fwd);
    }
    if (flow.height() > 1) {
        const bool fwd = qy + 1 < flow.height();
        const double nb = flow.vec(qx, fwd ? qy + 1 : qy - 1).y;
        p.y = linearized_step(qy, here.y, nb, fwd);
    }
    return p;
}

PixelSolution solve_pixel(const FlowField& flow, int qx, int qy, const ResampleOptions& opts) {
    const Vec2 q{static_cast<double>(qx), static_cast<double>(qy)};
    const double diverged = 2.0 * std::hypot(flow.width(), flow.height());

    PixelSolution s;
    Vec2 p = opts.use_derivative_init ? init_estimate(flow, qx, qy) : q;
    Vec2 next = p;
    for (int i = 1; i <= opts.max_iterations; ++i) {
        next = q - sample_flow_clamped(flow, p);
        s.iterations = i;
        const double step = norm(next - p);
        if (step < opts.tolerance) {
            // Residual of p is exactly this step, so convergence implies |p + f(p) - q| < tol.
            s.converged = true;
            s.p = p;
            s.residual = step;
            s.inside = in_domain(p, flow);
            return s;
        }
        p = next;
        if (norm(p - q) > diverged) break;
    }
    s.p = p;
    s.residual = norm(p + sample_flow_clamped(flow, p) - q);
    s.inside = in_domain(p, flow);
    return s;
}

std::uint64_t ResampleReport::histogram_total() const {
    std::uint64_t total = 0;
    for (auto c : residual_histogram) total += c;
    return total;
}

BackwardMap solve_backward_map(const FlowField& flow, const ResampleOptions& opts) {
    opts.validate();
    if (flow.empty()) throw InvalidInput("resample: empty flow");
    const int w = flow.width();
    const int h = flow.height();

    BackwardMap out;
    out.solutions.resize(flow.pixel_count());
    for_each_row(h, opts.execution, [&](int y) {
        for (int x = 0; x < w; ++x) {
            out.solutions[static_cast<std::size_t>(y) * w + x] = solve_pixel(flow, x, y, opts);
        }
    });

    ResampleReport& r = out.report;
    r.width = w;
    r.height = h;
    r.iterations.resize(out.solutions.size());
    std::uint64_t converged = 0;
    std::uint64_t invalid = 0;
    std::uint64_t iteration_sum = 0;
    for (std::size_t i = 0; i < out.solutions.size(); ++i) {
        const PixelSolution& s = out.solutions[i];
        r.iterations[i] = static_cast<std::uint16_t>(std::min(s.iterations, 65535));
        iteration_sum += static_cast<std::uint64_t>(s.iterations);
        if (s.converged) ++converged;
        if (!s.inside && opts.boundary == BoundaryPolicy::MarkInvalid) ++invalid;
        ++r.residual_histogram[histogram_bin(s.residual)];
    }
    const double n = static_cast<double>(out.solutions.size());
    r.fraction_converged = static_cast<double>(converged) / n;
    r.fraction_invalid = static_cast<double>(invalid) / n;
    r.mean_iterations = static_cast<double>(iteration_sum) / n;
    return out;
}

ResampleResult resample(const ImageBuffer& image, const FlowField& flow, const ResampleOptions& opts) {
    if (image.width() != flow.width() || image.height() != flow.height()) {
        throw InvalidInput("resample: image is " + std::to_string(image.width()) + "x" +
                           std::to_string(image.height()) + " but flow is " +
                           std::to_string(flow.width()) + "x" + std::to_string(flow.height()));
    }
    BackwardMap map = solve_backward_map(flow, opts);

    const int w = image.width();
    const int h = image.height();
    const int channels = image.channels();
    ImageBuffer out(w, h, channels);
    std::vector<std::uint8_t> valid(out.pixel_count(), 1);
    for_each_row(h, opts.execution, [&](int y) {
        std::array<float, 4> color{};
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const PixelSolution& s = map.solutions[i];
            Vec2 p = s.p;
            bool ok = true;
            if (!s.inside) {
                if (opts.boundary == BoundaryPolicy::MarkInvalid) {
                    ok = false;
                } else {
                    p.x = std::clamp(p.x, 0.0, static_cast<double>(w - 1));
                    p.y = std::clamp(p.y, 0.0, static_cast<double>(h - 1));
                }
            }
            ok = ok && sample_image_bilinear(image, p, std::span<float>(color.data(), channels));
            if (!ok) {
                valid[i] = 0;
                for (int c = 0; c < channels; ++c) out.at(x, y, c) = 0.0F;
                continue;
            }
            for (int c = 0; c < channels; ++c) out.at(x, y, c) = color[c];
        }
    });

    std::uint64_t invalid = 0;
    for (auto v : valid) invalid += v == 0 ? 1 : 0;
    if (invalid > 0) out.set_mask(std::move(valid));
    map.report.fraction_invalid = static_cast<double>(invalid) / static_cast<double>(out.pixel_count());
    return {std::move(out), std::move(map.report)};
}

}  // namespace geowarp
