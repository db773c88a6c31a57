#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/models.hpp"
#include "geowarp/parallel.hpp"

namespace geowarp {

struct CropRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const CropRect&, const CropRect&) = default;
};

struct DistortedPair {
    ImageBuffer image;
    FlowField flow;
};

/// Warps `src` so that D(p) = src(forward_map(p)). Pixels whose preimage leaves the source
/// (or hits a singular mapping) are masked invalid in both outputs. With `region`, only that
/// window of the full-size result is produced, using the full-size geometry.
DistortedPair distort_image(const ImageBuffer& src, const DistortionParams& params,
                            std::optional<CropRect> region = std::nullopt);

/// Same window of a flow field, positions re-indexed, vectors untouched.
FlowField crop_flow(const FlowField& flow, const CropRect& rect);
ImageBuffer crop_image(const ImageBuffer& img, const CropRect& rect);

struct CropOptions {
    int output_width = 0;   // 0 keeps the maximal valid rectangle
    int output_height = 0;
};

struct CroppedPair {
    ImageBuffer image;
    FlowField flow;
    CropRect rect;
};

/// Largest-area rectangle centred on the image that contains only pixels valid in both the
/// image and the flow. When an output size is set, the rectangle must be at least that big and
/// is then centre-cropped to it. Throws GenerationFailure when no such rectangle exists.
CroppedPair crop_valid(const ImageBuffer& img, const FlowField& flow, const CropOptions& opts = {});

/// Area-averaging downscale / bilinear upscale.
ImageBuffer resize_image(const ImageBuffer& img, int width, int height);

struct SynthConfig {
    std::filesystem::path source_dir;
    std::filesystem::path out_dir;
    int per_type_count = 1;
    std::vector<DistortionType> types{kAllTypes.begin(), kAllTypes.end()};
    ParamRange ranges = ParamRange::defaults();
    std::uint64_t seed = 0;
    int output_size = 256;
    /// Sources are resized to a square canvas of output_size * canvas_scale before warping.
    double canvas_scale = 1.6;
    int max_attempts = 10;
    Execution execution = Execution::Parallel;
};

struct ManifestRecord {
    std::string image;  // relative to the manifest directory
    std::string flow;
    DistortionType type = DistortionType::Barrel;
    DistortionParams params;
    CropRect crop;
    int canvas_width = 0;
    int canvas_height = 0;
    std::string source;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Flow the record's parameters produce on its canvas, cropped like the stored flow.
FlowField regenerate_record_flow(const ManifestRecord& record);

/// Writes images/, flows/ and manifest.json under config.out_dir.
DatasetManifest generate_dataset(const SynthConfig& config);

}  // namespace geowarp
