#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/models.hpp"

namespace geowarp::io {

/// "PIEH" read as a little-endian float32.
inline constexpr float kFlowMagic = 202021.25F;
inline constexpr int kMaxFlowDimension = 32768;
/// Components above this magnitude mark a pixel whose flow is unknown.
inline constexpr float kUnknownFlowThreshold = 1e9F;

/// Flow file: 4-byte magic, int32 width, int32 height, then width*height interleaved
/// (fx, fy) float32 pairs in row-major order. Everything little-endian.
std::vector<std::uint8_t> encode_flow(const FlowField& flow);

/// Throws FormatError (with byte offset) on bad magic, bad dimensions, truncation, or
/// trailing bytes. Pixels with an unknown-flow sentinel are masked invalid; their stored
/// values are kept so that re-encoding reproduces the input bytes.
FlowField decode_flow(std::span<const std::uint8_t> bytes);

void write_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow(const std::filesystem::path& path);

/// 8-bit PNG. Gray and gray+alpha inputs are expanded to RGB/RGBA; 16-bit inputs are reduced.
/// A zero alpha marks a pixel invalid.
ImageBuffer read_png(const std::filesystem::path& path);

/// Writes RGB, or RGBA when the buffer has four channels or a validity mask (invalid pixels
/// get zero alpha).
void write_png(const std::filesystem::path& path, const ImageBuffer& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Classifier output handed over by an external predictor: distortion type, six per-type
/// scores in canonical type order, and the path of the predicted flow relative to the
/// sidecar's directory.
struct PredictionSidecar {
    DistortionType type = DistortionType::Barrel;
    std::array<double, 6> scores{};
    std::string flow;

    std::filesystem::path flow_path(const std::filesystem::path& sidecar_path) const;
};

/// Parses and validates a sidecar document; throws FormatError on schema violations.
PredictionSidecar parse_sidecar(const std::string& json_text);
PredictionSidecar read_sidecar(const std::filesystem::path& path);
std::string sidecar_to_json(const PredictionSidecar& sidecar);

}  // namespace geowarp::io
