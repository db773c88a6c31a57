#include "geowarp/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace geowarp {

HoughAccumulator::HoughAccumulator(std::vector<Interval> bounds, int cells_per_dim)
    : bounds_(std::move(bounds)), cells_(cells_per_dim) {
    if (bounds_.empty() || bounds_.size() > 2) throw InvalidInput("HoughAccumulator: 1 or 2 dimensions");
    if (cells_ < 1) throw InvalidInput("HoughAccumulator: cell count must be >= 1");
    for (const Interval& b : bounds_) {
        if (!(b.min < b.max)) throw InvalidInput("HoughAccumulator: empty interval");
    }
    std::size_t n = 1;
    for (std::size_t d = 0; d < bounds_.size(); ++d) n *= static_cast<std::size_t>(cells_);
    counts_.assign(n, 0);
    sums_.assign(n, {0.0, 0.0});
}

bool HoughAccumulator::vote(std::span<const double> sample) {
    std::size_t cell = 0;
    for (int d = dims() - 1; d >= 0; --d) {
        const double v = sample[d];
        const Interval& b = bounds_[d];
        if (!std::isfinite(v) || v < b.min || v > b.max) return false;
        const int k = std::min(static_cast<int>((v - b.min) / b.width() * cells_), cells_ - 1);
        cell = cell * cells_ + static_cast<std::size_t>(k);
    }
    ++counts_[cell];
    for (int d = 0; d < dims(); ++d) sums_[cell][d] += sample[d];
    ++total_;
    return true;
}

void HoughAccumulator::merge(const HoughAccumulator& other) {
    if (other.cells_ != cells_ || other.dims() != dims()) {
        throw InvalidInput("HoughAccumulator: merging accumulators of different shape");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
        sums_[i][0] += other.sums_[i][0];
        sums_[i][1] += other.sums_[i][1];
    }
    total_ += other.total_;
}

std::array<double, 2> HoughAccumulator::cell_centre(std::size_t cell) const {
    std::array<double, 2> c{};
    for (int d = 0; d < dims(); ++d) {
        const std::size_t k = cell % static_cast<std::size_t>(cells_);
        cell /= static_cast<std::size_t>(cells_);
        c[d] = bounds_[d].min + (static_cast<double>(k) + 0.5) * cell_width(d);
    }
    return c;
}

std::array<double, 2> HoughAccumulator::cell_mean(std::size_t cell) const {
    std::array<double, 2> m{};
    if (counts_[cell] == 0) return cell_centre(cell);
    for (int d = 0; d < dims(); ++d) m[d] = sums_[cell][d] / static_cast<double>(counts_[cell]);
    return m;
}

std::size_t HoughAccumulator::winner() const {
    std::size_t best = 0;
    double best_mag = 0.0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        const auto c = cell_centre(i);
        const double mag = std::hypot(c[0], c[1]);
        if (i == 0 || counts_[i] > counts_[best] || (counts_[i] == counts_[best] && mag < best_mag)) {
            best = i;
            best_mag = mag;
        }
    }
    return best;
}

namespace {

using Estimate = std::array<double, 2>;

// Estimates contributed by row y. Pixels or partners masked invalid contribute nothing.
void row_estimates(const FlowField& flow, DistortionType type, const NormalizedCoords& geom,
                   const FitOptions& opts, int y, std::vector<Estimate>& out) {
    const int w = flow.width();
    const int h = flow.height();
    auto inversion = [&](int x, int yy) {
        return invert_pixel(type, {static_cast<double>(x), static_cast<double>(yy)}, flow.vec(x, yy), geom);
    };

    switch (type) {
        case DistortionType::Perspective: {
            for (int x = 0; x + opts.pair_offset < w; ++x) {
                const int x2 = x + opts.pair_offset;
                if (!flow.valid(x, y) || !flow.valid(x2, y)) continue;
                const auto a = inversion(x, y);
                const auto b = inversion(x2, y);
                if (!a || !b) continue;
                const auto sol = solve_perspective_pair(std::get<LinearConstraint>(*a),
                                                        std::get<LinearConstraint>(*b));
                if (sol) out.push_back(*sol);
            }
            break;
        }
        case DistortionType::Wave: {
            const int step = opts.pair_offset;
            if (y - step < 0 || y + step >= h) break;
            for (int x = 0; x < w; ++x) {
                if (!flow.valid(x, y) || !flow.valid(x, y - step) || !flow.valid(x, y + step)) continue;
                const auto below = inversion(x, y - step);
                const auto centre = inversion(x, y);
                const auto above = inversion(x, y + step);
                if (!below || !centre || !above) continue;
                const auto sol = solve_wave_triple(std::get<WaveSample>(*below), std::get<WaveSample>(*centre),
                                                   std::get<WaveSample>(*above), 0.5);
                if (sol) out.push_back(*sol);
            }
            break;
        }
        default: {
            for (int x = 0; x < w; ++x) {
                if (!flow.valid(x, y)) continue;
                const auto inv = inversion(x, y);
                if (inv) out.push_back({std::get<double>(*inv), 0.0});
            }
            break;
        }
    }
}

}  // namespace

FitResult hough_fit(const FlowField& flow, DistortionType type, const ParamRange& ranges,
                    const FitOptions& opts) {
    if (flow.empty()) throw InvalidInput("hough_fit: empty flow");
    if (opts.cells < 1) throw InvalidInput("hough_fit: cell count must be >= 1");
    if (opts.pair_offset < 1) throw InvalidInput("hough_fit: pair offset must be >= 1");
    ranges.validate();

    const NormalizedCoords geom = NormalizedCoords::for_size(flow.width(), flow.height());
    std::vector<std::vector<Estimate>> per_row(flow.height());
    for_each_row(flow.height(), opts.execution,
                 [&](int y) { row_estimates(flow, type, geom, opts, y, per_row[y]); });

    std::vector<Interval> bounds;
    for (int c = 0; c < param_count(type); ++c) bounds.push_back(ranges.of(type, c));
    HoughAccumulator acc(std::move(bounds), opts.cells);
    std::uint64_t estimates = 0;
    // Sequential vote in row order keeps the cell sums independent of scheduling.
    for (const auto& row : per_row) {
        for (const Estimate& e : row) {
            ++estimates;
            acc.vote(std::span<const double>(e.data(), static_cast<std::size_t>(acc.dims())));
        }
    }
    if (acc.total_votes() < opts.min_estimates) {
        throw InsufficientData("hough_fit(" + std::string(type_name(type)) + "): only " +
                               std::to_string(acc.total_votes()) + " in-range estimates out of " +
                               std::to_string(estimates));
    }

    const std::size_t cell = acc.winner();
    FitResult fit;
    fit.params.type = type;
    const auto mean = acc.cell_mean(cell);
    for (int c = 0; c < acc.dims(); ++c) fit.params.rho[c] = mean[c];
    fit.votes = acc.count(cell);
    fit.estimates = estimates;
    fit.inlier_fraction = static_cast<double>(fit.votes) / static_cast<double>(estimates);
    fit.refit_epe = masked_epe(flow, refine_flow(fit, flow.width(), flow.height()));
    return fit;
}

FlowField refine_flow(const FitResult& fit, int width, int height) {
    return flow_field(fit.params, width, height);
}

std::vector<FitResult> identify_model(const FlowField& flow, const ParamRange& ranges,
                                      const FitOptions& opts) {
    std::vector<FitResult> fits;
    for (DistortionType t : kAllTypes) {
        try {
            fits.push_back(hough_fit(flow, t, ranges, opts));
        } catch (const AlgorithmError&) {
        }
    }
    if (fits.empty()) throw Unidentifiable("identify_model: no distortion model fits this flow");
    // Stable sort keeps canonical type order among equal refit errors.
    std::stable_sort(fits.begin(), fits.end(),
                     [](const FitResult& a, const FitResult& b) { return a.refit_epe < b.refit_epe; });
    return fits;
}

}  // namespace geowarp
