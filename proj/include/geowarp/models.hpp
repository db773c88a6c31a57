#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "geowarp/core.hpp"

namespace geowarp {

enum class DistortionType : int { Barrel = 0, Pincushion, Rotation, Shear, Perspective, Wave };

inline constexpr std::array<DistortionType, 6> kAllTypes = {
    DistortionType::Barrel, DistortionType::Pincushion,  DistortionType::Rotation,
    DistortionType::Shear,  DistortionType::Perspective, DistortionType::Wave};

std::string_view type_name(DistortionType t);
std::optional<DistortionType> parse_type(std::string_view name);

/// 1 for Barrel, Pincushion, Rotation and Shear; 2 for Perspective (a, b) and Wave (A, T).
int param_count(DistortionType t);

/// Model parameters. Units: Barrel/Pincushion lambda is dimensionless (normalized
/// coordinates), Rotation theta is in degrees, Shear s is dimensionless, Perspective (a, b)
/// are dimensionless, Wave amplitude and period are in pixels.
struct DistortionParams {
    DistortionType type = DistortionType::Rotation;
    std::array<double, 2> rho{};

    static DistortionParams barrel(double lambda) { return {DistortionType::Barrel, {lambda, 0.0}}; }
    static DistortionParams pincushion(double lambda) {
        return {DistortionType::Pincushion, {lambda, 0.0}};
    }
    static DistortionParams rotation(double degrees) {
        return {DistortionType::Rotation, {degrees, 0.0}};
    }
    static DistortionParams shear(double s) { return {DistortionType::Shear, {s, 0.0}}; }
    static DistortionParams perspective(double a, double b) {
        return {DistortionType::Perspective, {a, b}};
    }
    static DistortionParams wave(double amplitude, double period) {
        return {DistortionType::Wave, {amplitude, period}};
    }

    friend bool operator==(const DistortionParams&, const DistortionParams&) = default;
};

struct Interval {
    double min = 0.0;
    double max = 0.0;
    double width() const { return max - min; }
    bool contains(double v) const { return v >= min && v <= max; }
};

/// Per-type sampling and voting bounds, one interval per parameter component.
struct ParamRange {
    std::array<std::array<Interval, 2>, 6> bounds{};

    static ParamRange defaults();

    const Interval& of(DistortionType t, int component) const {
        return bounds[static_cast<int>(t)][component];
    }
    Interval& of(DistortionType t, int component) { return bounds[static_cast<int>(t)][component]; }

    /// Throws InvalidInput when min >= max, or when a radial range straddles zero or has the
    /// wrong sign for its type.
    void validate() const;
};

/// Throws InvalidInput unless the parameters are finite and respect the type's sign
/// constraints (Barrel lambda <= 0, Pincushion lambda >= 0, Wave amplitude >= 0 and period > 0).
void validate_params(const DistortionParams& params);

/// Guard for degenerate geometry in normalized units.
inline constexpr double kModelEpsilon = 1e-6;

/// Distorted point (pixel coordinates) to corrected point. std::nullopt on a singular
/// mapping (division or homography denominator <= kModelEpsilon).
std::optional<Vec2> forward_map(const DistortionParams& params, Vec2 p, const NormalizedCoords& geom);

/// Dense flow F(p) = forward_map(p) - p; singular pixels are masked invalid with zero vectors.
FlowField flow_field(const DistortionParams& params, int width, int height);

/// Linear constraint  a_coef * a + b_coef * b = rhs  on the perspective parameters.
struct LinearConstraint {
    double a_coef = 0.0;
    double b_coef = 0.0;
    double rhs = 0.0;
};

/// One sample of the wave model: A * sin(2*pi*y/T) = fx at row y.
struct WaveSample {
    double y = 0.0;
    double fx = 0.0;
};

/// What a single flow vector says about the model parameters.
using PixelInversion = std::variant<double, LinearConstraint, WaveSample>;

/// Inverse model for one pixel. std::nullopt marks an uninformative pixel.
std::optional<PixelInversion> invert_pixel(DistortionType type, Vec2 position, Vec2 vec,
                                           const NormalizedCoords& geom);

/// Joint solution of two perspective constraints; std::nullopt when the 2x2 system is
/// ill-conditioned (|det| < min_det).
std::optional<std::array<double, 2>> solve_perspective_pair(const LinearConstraint& c1,
                                                            const LinearConstraint& c2,
                                                            double min_det = 1e-4);

/// Wave (A, T) from three samples at rows y - step, y, y + step. std::nullopt when the
/// centre sample is too small to resolve the period or the cosine is out of [-1, 1].
std::optional<std::array<double, 2>> solve_wave_triple(const WaveSample& below,
                                                       const WaveSample& centre,
                                                       const WaveSample& above,
                                                       double min_centre = 1e-3);

/// Deterministic uniform draw inside `ranges` for the given type.
DistortionParams sample_params(DistortionType type, const ParamRange& ranges, std::uint64_t seed);

}  // namespace geowarp
