#include "geowarp/core.hpp"

#include <algorithm>
#include <cmath>

namespace geowarp {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

namespace {

void check_dims(int width, int height, const char* what) {
    if (width <= 0 || height <= 0) {
        throw InvalidInput(std::string(what) + ": dimensions must be positive, got " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
}

// Cell origin and fractional offset along one axis. The last sample is addressed as the
// far corner of the previous cell so that grid points are reproduced exactly.
struct AxisStep {
    int i0;
    int i1;
    double t;
};

AxisStep axis_step(double v, int n) {
    if (n == 1) return {0, 0, 0.0};
    int i0 = static_cast<int>(std::floor(v));
    i0 = std::clamp(i0, 0, n - 2);
    return {i0, i0 + 1, v - i0};
}

bool inside(Vec2 p, int width, int height) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1;
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
    check_dims(width, height, "ImageBuffer");
    if (channels != 3 && channels != 4) throw InvalidInput("ImageBuffer: channels must be 3 or 4");
    data_.assign(pixel_count() * channels_, 0.0F);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<float> data,
                         std::vector<std::uint8_t> valid)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)),
      valid_(std::move(valid)) {
    validate();
}

void ImageBuffer::set_valid(int x, int y, bool v) {
    if (valid_.empty()) {
        if (v) return;
        valid_.assign(pixel_count(), 1);
    }
    valid_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
}

void ImageBuffer::set_mask(std::vector<std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != pixel_count()) {
        throw InvalidInput("ImageBuffer: mask size does not match pixel count");
    }
    valid_ = std::move(mask);
}

std::size_t ImageBuffer::valid_count() const {
    if (valid_.empty()) return pixel_count();
    return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

void ImageBuffer::validate() const {
    check_dims(width_, height_, "ImageBuffer");
    if (channels_ != 3 && channels_ != 4) throw InvalidInput("ImageBuffer: channels must be 3 or 4");
    if (data_.size() != pixel_count() * channels_) {
        throw InvalidInput("ImageBuffer: sample count does not match width*height*channels");
    }
    if (!valid_.empty() && valid_.size() != pixel_count()) {
        throw InvalidInput("ImageBuffer: mask size does not match pixel count");
    }
    for (float s : data_) {
        if (!std::isfinite(s) || s < 0.0F || s > 1.0F) {
            throw InvalidInput("ImageBuffer: samples must be finite and within [0,1]");
        }
    }
}

FlowField::FlowField(int width, int height) : width_(width), height_(height) {
    check_dims(width, height, "FlowField");
    vectors_.assign(pixel_count(), FlowVector{});
}

FlowField::FlowField(int width, int height, std::vector<FlowVector> vectors,
                     std::vector<std::uint8_t> valid)
    : width_(width), height_(height), vectors_(std::move(vectors)), valid_(std::move(valid)) {
    validate();
}

void FlowField::set_valid(int x, int y, bool v) {
    if (valid_.empty()) {
        if (v) return;
        valid_.assign(pixel_count(), 1);
    }
    valid_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
}

void FlowField::set_mask(std::vector<std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != pixel_count()) {
        throw InvalidInput("FlowField: mask size does not match pixel count");
    }
    valid_ = std::move(mask);
}

void FlowField::validate() const {
    check_dims(width_, height_, "FlowField");
    if (vectors_.size() != pixel_count()) {
        throw InvalidInput("FlowField: vector count does not match width*height");
    }
    if (!valid_.empty() && valid_.size() != pixel_count()) {
        throw InvalidInput("FlowField: mask size does not match pixel count");
    }
    for (const FlowVector& v : vectors_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
            throw InvalidInput("FlowField: vectors must be finite");
        }
    }
}

NormalizedCoords NormalizedCoords::for_size(int width, int height) {
    check_dims(width, height, "NormalizedCoords");
    return {(width - 1) / 2.0, (height - 1) / 2.0, std::max(width, height) / 2.0};
}

double epe(const FlowField& a, const FlowField& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw InvalidInput("epe: flow dimensions differ (" + std::to_string(a.width()) + "x" +
                           std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                           std::to_string(b.height()) + ")");
    }
    if (a.empty()) throw InvalidInput("epe: empty flow");
    const auto va = a.vectors();
    const auto vb = b.vectors();
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        sum += std::hypot(static_cast<double>(va[i].x) - vb[i].x,
                          static_cast<double>(va[i].y) - vb[i].y);
    }
    return sum / static_cast<double>(va.size());
}

double masked_epe(const FlowField& a, const FlowField& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw InvalidInput("masked_epe: flow dimensions differ");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (!a.valid(x, y) || !b.valid(x, y)) continue;
            sum += norm(a.vec(x, y) - b.vec(x, y));
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double mean_magnitude(const FlowField& f) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            if (!f.valid(x, y)) continue;
            sum += norm(f.vec(x, y));
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

FlowField scale_flow(const FlowField& f, double k) {
    if (!std::isfinite(k)) throw InvalidInput("scale_flow: factor must be finite");
    std::vector<FlowVector> out(f.vectors().begin(), f.vectors().end());
    for (FlowVector& v : out) {
        v.x = static_cast<float>(k * v.x);
        v.y = static_cast<float>(k * v.y);
    }
    return FlowField(f.width(), f.height(), std::move(out),
                     std::vector<std::uint8_t>(f.mask().begin(), f.mask().end()));
}

std::optional<Vec2> sample_flow_bilinear(const FlowField& f, Vec2 p) {
    if (!inside(p, f.width(), f.height())) return std::nullopt;
    const AxisStep sx = axis_step(p.x, f.width());
    const AxisStep sy = axis_step(p.y, f.height());
    const Vec2 v00 = f.vec(sx.i0, sy.i0);
    const Vec2 v10 = f.vec(sx.i1, sy.i0);
    const Vec2 v01 = f.vec(sx.i0, sy.i1);
    const Vec2 v11 = f.vec(sx.i1, sy.i1);
    const double w00 = (1.0 - sx.t) * (1.0 - sy.t);
    const double w10 = sx.t * (1.0 - sy.t);
    const double w01 = (1.0 - sx.t) * sy.t;
    const double w11 = sx.t * sy.t;
    return Vec2{w00 * v00.x + w10 * v10.x + w01 * v01.x + w11 * v11.x,
                w00 * v00.y + w10 * v10.y + w01 * v01.y + w11 * v11.y};
}

Vec2 sample_flow_clamped(const FlowField& f, Vec2 p) {
    const Vec2 c{std::clamp(p.x, 0.0, static_cast<double>(f.width() - 1)),
                 std::clamp(p.y, 0.0, static_cast<double>(f.height() - 1))};
    return *sample_flow_bilinear(f, c);
}

bool sample_image_bilinear(const ImageBuffer& img, Vec2 p, std::span<float> out) {
    if (!inside(p, img.width(), img.height())) return false;
    const AxisStep sx = axis_step(p.x, img.width());
    const AxisStep sy = axis_step(p.y, img.height());
    const double w[4] = {(1.0 - sx.t) * (1.0 - sy.t), sx.t * (1.0 - sy.t), (1.0 - sx.t) * sy.t,
                         sx.t * sy.t};
    const int xs[4] = {sx.i0, sx.i1, sx.i0, sx.i1};
    const int ys[4] = {sy.i0, sy.i0, sy.i1, sy.i1};
    if (img.has_mask()) {
        for (int k = 0; k < 4; ++k) {
            if (w[k] > 0.0 && !img.valid(xs[k], ys[k])) return false;
        }
    }
    for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += w[k] * img.at(xs[k], ys[k], c);
        out[c] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
    return true;
}

}  // namespace geowarp
