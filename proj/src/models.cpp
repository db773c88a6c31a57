#include "geowarp/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace geowarp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

std::string_view type_name(DistortionType t) {
    switch (t) {
        case DistortionType::Barrel: return "barrel";
        case DistortionType::Pincushion: return "pincushion";
        case DistortionType::Rotation: return "rotation";
        case DistortionType::Shear: return "shear";
        case DistortionType::Perspective: return "perspective";
        case DistortionType::Wave: return "wave";
    }
    return "unknown";
}

std::optional<DistortionType> parse_type(std::string_view name) {
    for (DistortionType t : kAllTypes) {
        if (type_name(t) == name) return t;
    }
    return std::nullopt;
}

int param_count(DistortionType t) {
    return (t == DistortionType::Perspective || t == DistortionType::Wave) ? 2 : 1;
}

ParamRange ParamRange::defaults() {
    ParamRange r;
    r.of(DistortionType::Barrel, 0) = {-0.4, -0.05};
    r.of(DistortionType::Pincushion, 0) = {0.05, 0.4};
    r.of(DistortionType::Rotation, 0) = {-30.0, 30.0};
    r.of(DistortionType::Shear, 0) = {-0.4, 0.4};
    r.of(DistortionType::Perspective, 0) = {-0.3, 0.3};
    r.of(DistortionType::Perspective, 1) = {-0.3, 0.3};
    r.of(DistortionType::Wave, 0) = {2.0, 8.0};
    r.of(DistortionType::Wave, 1) = {20.0, 100.0};
    return r;
}

void ParamRange::validate() const {
    for (DistortionType t : kAllTypes) {
        for (int c = 0; c < param_count(t); ++c) {
            const Interval& iv = of(t, c);
            if (!std::isfinite(iv.min) || !std::isfinite(iv.max) || !(iv.min < iv.max)) {
                throw InvalidInput("ParamRange: empty or non-finite interval for " +
                                   std::string(type_name(t)));
            }
        }
    }
    if (of(DistortionType::Barrel, 0).max >= 0.0) {
        throw InvalidInput("ParamRange: barrel range must lie strictly below zero");
    }
    if (of(DistortionType::Pincushion, 0).min <= 0.0) {
        throw InvalidInput("ParamRange: pincushion range must lie strictly above zero");
    }
    if (of(DistortionType::Wave, 1).min <= 0.0) {
        throw InvalidInput("ParamRange: wave period must be positive");
    }
}

void validate_params(const DistortionParams& params) {
    for (int c = 0; c < param_count(params.type); ++c) {
        if (!std::isfinite(params.rho[c])) {
            throw InvalidInput("distortion parameter is not finite");
        }
    }
    switch (params.type) {
        case DistortionType::Barrel:
            if (params.rho[0] > 0.0) throw InvalidInput("barrel lambda must be <= 0");
            break;
        case DistortionType::Pincushion:
            if (params.rho[0] < 0.0) throw InvalidInput("pincushion lambda must be >= 0");
            break;
        case DistortionType::Wave:
            if (params.rho[0] < 0.0) throw InvalidInput("wave amplitude must be >= 0");
            if (params.rho[1] <= 0.0) throw InvalidInput("wave period must be > 0");
            break;
        default:
            break;
    }
}

std::optional<Vec2> forward_map(const DistortionParams& params, Vec2 p, const NormalizedCoords& geom) {
    if (params.type == DistortionType::Wave) {
        const double amplitude = params.rho[0];
        const double period = params.rho[1];
        if (amplitude == 0.0) return p;
        return Vec2{p.x + amplitude * std::sin(2.0 * std::numbers::pi * p.y / period), p.y};
    }

    const Vec2 n = geom.to_normalized(p);
    Vec2 m;
    switch (params.type) {
        case DistortionType::Barrel:
        case DistortionType::Pincushion: {
            const double denom = 1.0 + params.rho[0] * (n.x * n.x + n.y * n.y);
            if (denom <= kModelEpsilon) return std::nullopt;
            m = {n.x / denom, n.y / denom};
            break;
        }
        case DistortionType::Rotation: {
            // y points down, so a positive angle turns (1,0) towards (0,-1).
            const double c = std::cos(params.rho[0] * kDegToRad);
            const double s = std::sin(params.rho[0] * kDegToRad);
            m = {c * n.x + s * n.y, -s * n.x + c * n.y};
            break;
        }
        case DistortionType::Shear:
            m = {n.x + params.rho[0] * n.y, n.y};
            break;
        case DistortionType::Perspective: {
            const double w = 1.0 + params.rho[0] * n.x + params.rho[1] * n.y;
            if (w <= kModelEpsilon) return std::nullopt;
            m = {n.x / w, n.y / w};
            break;
        }
        case DistortionType::Wave:
            break;
    }
    return geom.to_pixel(m);
}

FlowField flow_field(const DistortionParams& params, int width, int height) {
    if (width < 2 || height < 2) throw InvalidInput("flow_field: width and height must be >= 2");
    const NormalizedCoords geom = NormalizedCoords::for_size(width, height);
    FlowField flow(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
            const auto q = forward_map(params, p, geom);
            if (!q) {
                flow.set_valid(x, y, false);
                continue;
            }
            flow.at(x, y) = {static_cast<float>(q->x - p.x), static_cast<float>(q->y - p.y)};
        }
    }
    return flow;
}

std::optional<PixelInversion> invert_pixel(DistortionType type, Vec2 position, Vec2 vec,
                                           const NormalizedCoords& geom) {
    if (!std::isfinite(vec.x) || !std::isfinite(vec.y)) return std::nullopt;
    if (type == DistortionType::Wave) return WaveSample{position.y, vec.x};

    const Vec2 d = geom.to_normalized(position);
    const Vec2 dn{vec.x / geom.scale, vec.y / geom.scale};
    const Vec2 u = d + dn;
    const double rd = norm(d);

    switch (type) {
        case DistortionType::Barrel:
        case DistortionType::Pincushion: {
            const double ru = norm(u);
            if (rd < kModelEpsilon || ru < kModelEpsilon) return std::nullopt;
            return PixelInversion{(rd / ru - 1.0) / (rd * rd)};
        }
        case DistortionType::Rotation: {
            if (rd < kModelEpsilon || norm(u) < kModelEpsilon) return std::nullopt;
            const double cross = d.y * u.x - d.x * u.y;
            const double dot = d.x * u.x + d.y * u.y;
            return PixelInversion{std::atan2(cross, dot) / kDegToRad};
        }
        case DistortionType::Shear:
            if (std::abs(d.y) < kModelEpsilon) return std::nullopt;
            return PixelInversion{dn.x / d.y};
        case DistortionType::Perspective: {
            // The homography moves points along rays through the centre: u = d / w.
            const double uu = u.x * u.x + u.y * u.y;
            if (rd < kModelEpsilon || uu < kModelEpsilon * kModelEpsilon) return std::nullopt;
            const double w = (d.x * u.x + d.y * u.y) / uu;
            return PixelInversion{LinearConstraint{d.x, d.y, w - 1.0}};
        }
        case DistortionType::Wave:
            break;
    }
    return std::nullopt;
}

std::optional<std::array<double, 2>> solve_perspective_pair(const LinearConstraint& c1,
                                                            const LinearConstraint& c2,
                                                            double min_det) {
    const double det = c1.a_coef * c2.b_coef - c1.b_coef * c2.a_coef;
    if (!(std::abs(det) >= min_det)) return std::nullopt;
    const double a = (c1.rhs * c2.b_coef - c1.b_coef * c2.rhs) / det;
    const double b = (c1.a_coef * c2.rhs - c1.rhs * c2.a_coef) / det;
    return std::array<double, 2>{a, b};
}

std::optional<std::array<double, 2>> solve_wave_triple(const WaveSample& below,
                                                       const WaveSample& centre,
                                                       const WaveSample& above,
                                                       double min_centre) {
    const double step = above.y - centre.y;
    if (!(step > 0.0) || std::abs((centre.y - below.y) - step) > 1e-9) return std::nullopt;
    if (!(std::abs(centre.fx) >= min_centre)) return std::nullopt;
    // sin(w(y-h)) + sin(w(y+h)) = 2 cos(wh) sin(wy)
    const double cos_wh = (below.fx + above.fx) / (2.0 * centre.fx);
    if (!(cos_wh > -1.0 && cos_wh < 1.0)) return std::nullopt;
    const double wh = std::acos(cos_wh);
    const double omega = wh / step;
    const double sin_wh = std::sin(wh);
    if (sin_wh < kModelEpsilon) return std::nullopt;
    const double s = centre.fx;                             // A sin(w y)
    const double c = (above.fx - centre.fx * cos_wh) / sin_wh;  // A cos(w y)
    const double phase = omega * centre.y;
    const double amplitude = s * std::sin(phase) + c * std::cos(phase);
    return std::array<double, 2>{amplitude, 2.0 * std::numbers::pi / omega};
}

DistortionParams sample_params(DistortionType type, const ParamRange& ranges, std::uint64_t seed) {
    ranges.validate();
    std::mt19937_64 rng(seed);
    // 53-bit mantissa draw; std::uniform_real_distribution is not portable across vendors.
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    DistortionParams p{type, {}};
    for (int c = 0; c < param_count(type); ++c) {
        const Interval& iv = ranges.of(type, c);
        p.rho[c] = iv.min + unit() * iv.width();
    }
    return p;
}

}  // namespace geowarp
