#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace geowarp {

// Error hierarchy. The CLI maps each family onto an exit status.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad dimensions, bad parameters).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Filesystem or codec failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed flow file or JSON document. Carries the byte offset of the fault.
class FormatError : public IoError {
public:
    FormatError(const std::string& what, std::size_t offset)
        : IoError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// An estimator could not produce a result from the data it was given.
class AlgorithmError : public Error {
public:
    using Error::Error;
};

class InsufficientData : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

class Unidentifiable : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

class GenerationFailure : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

double norm(Vec2 v);

/// Single-precision flow vector, the storage unit of FlowField and of the flow file body.
struct FlowVector {
    float x = 0.0F;
    float y = 0.0F;

    friend bool operator==(FlowVector a, FlowVector b) = default;
};

/// Raster of RGB or RGBA samples in [0,1], row-major, interleaved.
/// An empty validity mask means every pixel is valid.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels);
    ImageBuffer(int width, int height, int channels, std::vector<float> data,
                std::vector<std::uint8_t> valid = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool empty() const noexcept { return pixel_count() == 0; }

    float at(int x, int y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float& at(int x, int y, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    bool has_mask() const noexcept { return !valid_.empty(); }
    bool valid(int x, int y) const {
        return valid_.empty() || valid_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set_valid(int x, int y, bool v);
    std::span<const std::uint8_t> mask() const noexcept { return valid_; }
    void set_mask(std::vector<std::uint8_t> mask);
    void clear_mask() { valid_.clear(); }
    std::size_t valid_count() const;

    /// Throws InvalidInput unless the buffer satisfies its invariants.
    void validate() const;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 3;
    std::vector<float> data_;
    std::vector<std::uint8_t> valid_;
};

/// Dense forward displacement field: the corrected position of pixel p is p + F(p).
class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height);
    FlowField(int width, int height, std::vector<FlowVector> vectors,
              std::vector<std::uint8_t> valid = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool empty() const noexcept { return pixel_count() == 0; }

    FlowVector at(int x, int y) const { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
    FlowVector& at(int x, int y) { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
    Vec2 vec(int x, int y) const {
        const FlowVector v = at(x, y);
        return {v.x, v.y};
    }

    std::span<const FlowVector> vectors() const noexcept { return vectors_; }
    std::span<FlowVector> vectors() noexcept { return vectors_; }

    bool has_mask() const noexcept { return !valid_.empty(); }
    bool valid(int x, int y) const {
        return valid_.empty() || valid_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set_valid(int x, int y, bool v);
    std::span<const std::uint8_t> mask() const noexcept { return valid_; }
    void set_mask(std::vector<std::uint8_t> mask);
    void clear_mask() { valid_.clear(); }

    void validate() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<FlowVector> vectors_;
    std::vector<std::uint8_t> valid_;
};

/// Centered normalization used by all model math: u = (x - cx) / scale.
struct NormalizedCoords {
    double cx = 0.0;
    double cy = 0.0;
    double scale = 1.0;

    static NormalizedCoords for_size(int width, int height);

    Vec2 to_normalized(Vec2 pixel) const { return {(pixel.x - cx) / scale, (pixel.y - cy) / scale}; }
    Vec2 to_pixel(Vec2 n) const { return {n.x * scale + cx, n.y * scale + cy}; }
};

/// Mean endpoint error over all pixels. Throws InvalidInput on a size mismatch.
double epe(const FlowField& a, const FlowField& b);

/// Mean endpoint error over pixels valid in both fields. Returns 0 when none are.
double masked_epe(const FlowField& a, const FlowField& b);

/// Mean vector magnitude over valid pixels.
double mean_magnitude(const FlowField& f);

FlowField scale_flow(const FlowField& f, double k);

/// Bilinear flow lookup; std::nullopt when p lies outside [0,W-1]x[0,H-1].
std::optional<Vec2> sample_flow_bilinear(const FlowField& f, Vec2 p);

/// Same as sample_flow_bilinear but clamps p into the domain first.
Vec2 sample_flow_clamped(const FlowField& f, Vec2 p);

/// Bilinear color lookup into `out` (size = channels). Returns false when p is outside the
/// domain or touches an invalid pixel with non-zero weight.
bool sample_image_bilinear(const ImageBuffer& img, Vec2 p, std::span<float> out);

}  // namespace geowarp
