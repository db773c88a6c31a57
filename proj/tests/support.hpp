#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <random>
#include <vector>

#include "geowarp/core.hpp"
#include "geowarp/models.hpp"

namespace geowarp::testing {

inline FlowField random_flow(int w, int h, std::uint64_t seed, double amplitude = 10.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    FlowField f(w, h);
    for (auto& v : f.vectors()) v = {static_cast<float>(u(rng)), static_cast<float>(u(rng))};
    return f;
}

inline FlowField constant_flow(int w, int h, float fx, float fy) {
    FlowField f(w, h);
    for (auto& v : f.vectors()) v = {fx, fy};
    return f;
}

// Brute-force double loop, independent of the library's epe.
inline double epe_oracle(const FlowField& a, const FlowField& b) {
    long double sum = 0.0L;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const long double dx = static_cast<long double>(a.at(x, y).x) - b.at(x, y).x;
            const long double dy = static_cast<long double>(a.at(x, y).y) - b.at(x, y).y;
            sum += std::sqrt(dx * dx + dy * dy);
        }
    }
    return static_cast<double>(sum / (static_cast<long double>(a.width()) * a.height()));
}

// Coordinate ramp: R = x / W, G = y / H, B constant.
inline ImageBuffer ramp_image(int w, int h) {
    ImageBuffer img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<float>(static_cast<double>(x) / w);
            img.at(x, y, 1) = static_cast<float>(static_cast<double>(y) / h);
            img.at(x, y, 2) = 0.5F;
        }
    }
    return img;
}

inline Vec2 ramp_position(const ImageBuffer& img, int x, int y, int w, int h) {
    return {static_cast<double>(img.at(x, y, 0)) * w, static_cast<double>(img.at(x, y, 1)) * h};
}

// Smooth synthetic photograph: low-frequency colour gradients plus a sinusoidal texture.
inline ImageBuffer smooth_image(int w, int h) {
    ImageBuffer img(w, h, 3);
    const double pi = 3.14159265358979323846;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / w;
            const double v = static_cast<double>(y) / h;
            const double tex = 0.5 + 0.5 * std::sin(2 * pi * x / 23.0) * std::cos(2 * pi * y / 29.0);
            img.at(x, y, 0) = static_cast<float>(0.15 + 0.7 * (0.6 * u + 0.4 * tex));
            img.at(x, y, 1) = static_cast<float>(0.15 + 0.7 * (0.5 * v + 0.5 * tex));
            img.at(x, y, 2) = static_cast<float>(0.15 + 0.7 * (0.5 + 0.5 * std::sin(2 * pi * (u + v))) * 0.8);
        }
    }
    return img;
}

inline ImageBuffer checkerboard(int w, int h, int cell) {
    ImageBuffer img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float v = ((x / cell + y / cell) % 2) ? 0.9F : 0.1F;
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
        }
    return img;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("geowarp_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace geowarp::testing
