#include "geowarp/synthesizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "geowarp/io.hpp"

namespace geowarp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 1));
}

struct Tap {
    int index;
    float weight;
};

// Resampling taps for one axis: box average when shrinking, bilinear when growing.
std::vector<std::vector<Tap>> axis_taps(int in, int out) {
    std::vector<std::vector<Tap>> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        if (scale > 1.0) {
            const double lo = o * scale;
            const double hi = (o + 1) * scale;
            for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
                const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
                if (overlap > 0.0) taps[o].push_back({i, static_cast<float>(overlap / scale)});
            }
        } else {
            const double pos = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
            const int i0 = std::min(static_cast<int>(std::floor(pos)), std::max(in - 2, 0));
            const double t = pos - i0;
            taps[o].push_back({i0, static_cast<float>(1.0 - t)});
            if (in > 1) taps[o].push_back({i0 + 1, static_cast<float>(t)});
        }
    }
    return taps;
}

bool has_png_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

ImageBuffer to_rgb(const ImageBuffer& img) {
    if (img.channels() == 3) return img;
    ImageBuffer out(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, c);
    return out;
}

ImageBuffer prepare_canvas(const ImageBuffer& src, int canvas) {
    const int side = std::min(src.width(), src.height());
    const CropRect square{(src.width() - side) / 2, (src.height() - side) / 2, side, side};
    return resize_image(crop_image(to_rgb(src), square), canvas, canvas);
}

std::string record_stem(DistortionType t, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d", std::string(type_name(t)).c_str(), index);
    return buf;
}

}  // namespace

namespace {

// Lattice-preserving maps land a rounding error outside the last row or column.
Vec2 snap_to_domain(Vec2 q, int width, int height) {
    constexpr double kSlack = 1e-9;
    auto snap = [](double v, double hi) {
        if (v < 0.0 && v > -kSlack) return 0.0;
        if (v > hi && v < hi + kSlack) return hi;
        return v;
    };
    return {snap(q.x, width - 1.0), snap(q.y, height - 1.0)};
}

}  // namespace

DistortedPair distort_image(const ImageBuffer& src, const DistortionParams& params,
                            std::optional<CropRect> region) {
    if (src.width() < 64 || src.height() < 64) {
        throw InvalidInput("distort_image: source must be at least 64x64");
    }
    validate_params(params);
    const CropRect r = region.value_or(CropRect{0, 0, src.width(), src.height()});
    if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > src.width() ||
        r.y + r.height > src.height()) {
        throw InvalidInput("distort_image: region outside the source");
    }

    const NormalizedCoords geom = NormalizedCoords::for_size(src.width(), src.height());
    DistortedPair out{ImageBuffer(r.width, r.height, src.channels()), FlowField(r.width, r.height)};
    std::vector<std::uint8_t> valid(out.flow.pixel_count(), 1);
    for_each_row(r.height, Execution::Parallel, [&](int oy) {
        std::array<float, 4> color{};
        for (int ox = 0; ox < r.width; ++ox) {
            const Vec2 p{static_cast<double>(ox + r.x), static_cast<double>(oy + r.y)};
            const std::size_t i = static_cast<std::size_t>(oy) * r.width + ox;
            const auto q = forward_map(params, p, geom);
            if (!q) {
                valid[i] = 0;
                continue;
            }
            out.flow.at(ox, oy) = {static_cast<float>(q->x - p.x), static_cast<float>(q->y - p.y)};
            if (!sample_image_bilinear(src, snap_to_domain(*q, src.width(), src.height()), std::span<float>(color.data(), src.channels()))) {
                valid[i] = 0;
                continue;
            }
            for (int c = 0; c < src.channels(); ++c) out.image.at(ox, oy, c) = color[c];
        }
    });
    if (std::find(valid.begin(), valid.end(), 0) != valid.end()) {
        out.image.set_mask(valid);
        out.flow.set_mask(std::move(valid));
    }
    return out;
}

FlowField crop_flow(const FlowField& flow, const CropRect& rect) {
    FlowField out(rect.width, rect.height);
    std::vector<std::uint8_t> valid;
    for (int y = 0; y < rect.height; ++y) {
        for (int x = 0; x < rect.width; ++x) {
            out.at(x, y) = flow.at(x + rect.x, y + rect.y);
            if (!flow.valid(x + rect.x, y + rect.y)) out.set_valid(x, y, false);
        }
    }
    return out;
}

ImageBuffer crop_image(const ImageBuffer& img, const CropRect& rect) {
    ImageBuffer out(rect.width, rect.height, img.channels());
    for (int y = 0; y < rect.height; ++y) {
        for (int x = 0; x < rect.width; ++x) {
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x + rect.x, y + rect.y, c);
            if (!img.valid(x + rect.x, y + rect.y)) out.set_valid(x, y, false);
        }
    }
    return out;
}

CroppedPair crop_valid(const ImageBuffer& img, const FlowField& flow, const CropOptions& opts) {
    const int w = img.width();
    const int h = img.height();
    if (flow.width() != w || flow.height() != h) {
        throw InvalidInput("crop_valid: image and flow dimensions differ");
    }

    // Summed-area table of invalid pixels.
    std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    auto at = [&](int x, int y) -> std::int64_t& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int bad = (img.valid(x, y) && flow.valid(x, y)) ? 0 : 1;
            at(x + 1, y + 1) = bad + at(x, y + 1) + at(x + 1, y) - at(x, y);
        }
    }
    auto clean = [&](int dx, int dy) {
        const int x0 = dx, x1 = w - dx, y0 = dy, y1 = h - dy;
        return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0) == 0;
    };

    const int min_w = std::max(opts.output_width, 1);
    const int min_h = std::max(opts.output_height, 1);
    std::optional<CropRect> best;
    std::int64_t best_area = 0;
    for (int dx = 0; w - 2 * dx >= min_w; ++dx) {
        // Smallest vertical inset that makes the band clean; insets only shrink the rectangle.
        int lo = 0;
        int hi = (h - min_h) / 2;
        if (hi < 0 || !clean(dx, hi)) continue;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (clean(dx, mid)) hi = mid; else lo = mid + 1;
        }
        const CropRect r{dx, lo, w - 2 * dx, h - 2 * lo};
        const std::int64_t area = static_cast<std::int64_t>(r.width) * r.height;
        if (area > best_area) {
            best_area = area;
            best = r;
        }
    }
    if (!best) {
        throw GenerationFailure("crop_valid: no centred valid rectangle of at least " +
                                std::to_string(min_w) + "x" + std::to_string(min_h));
    }

    CropRect rect = *best;
    if (opts.output_width > 0 && opts.output_height > 0) {
        rect.x += (rect.width - opts.output_width) / 2;
        rect.y += (rect.height - opts.output_height) / 2;
        rect.width = opts.output_width;
        rect.height = opts.output_height;
    }
    return {crop_image(img, rect), crop_flow(flow, rect), rect};
}

ImageBuffer resize_image(const ImageBuffer& img, int width, int height) {
    if (width <= 0 || height <= 0) throw InvalidInput("resize_image: bad target size");
    if (width == img.width() && height == img.height()) return img;
    const int ch = img.channels();
    const auto tx = axis_taps(img.width(), width);
    const auto ty = axis_taps(img.height(), height);

    std::vector<float> rows(static_cast<std::size_t>(width) * img.height() * ch, 0.0F);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < width; ++x)
            for (const Tap& t : tx[x])
                for (int c = 0; c < ch; ++c)
                    rows[(static_cast<std::size_t>(y) * width + x) * ch + c] += t.weight * img.at(t.index, y, c);

    ImageBuffer out(width, height, ch);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < ch; ++c) {
                float acc = 0.0F;
                for (const Tap& t : ty[y]) acc += t.weight * rows[(static_cast<std::size_t>(t.index) * width + x) * ch + c];
                out.at(x, y, c) = std::clamp(acc, 0.0F, 1.0F);
            }
        }
    }
    return out;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json records = nlohmann::json::array();
    for (const ManifestRecord& r : manifest.records) {
        nlohmann::json rho = nlohmann::json::array();
        for (int c = 0; c < param_count(r.type); ++c) rho.push_back(r.params.rho[c]);
        records.push_back({
            {"image", r.image},
            {"flow", r.flow},
            {"type", std::string(type_name(r.type))},
            {"rho", rho},
            {"crop", {{"x", r.crop.x}, {"y", r.crop.y}, {"width", r.crop.width}, {"height", r.crop.height}}},
            {"canvas", {{"width", r.canvas_width}, {"height", r.canvas_height}}},
            {"source", r.source},
            {"seed", r.seed},
        });
    }
    nlohmann::json doc{{"version", 1}, {"records", records}};
    return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
    DatasetManifest m;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& j : doc.at("records")) {
            ManifestRecord r;
            r.image = j.at("image").get<std::string>();
            r.flow = j.at("flow").get<std::string>();
            const auto type = parse_type(j.at("type").get<std::string>());
            if (!type) throw FormatError("manifest: unknown type", 0);
            r.type = *type;
            r.params.type = r.type;
            const auto& rho = j.at("rho");
            if (static_cast<int>(rho.size()) != param_count(r.type)) {
                throw FormatError("manifest: wrong parameter count", 0);
            }
            for (std::size_t c = 0; c < rho.size(); ++c) r.params.rho[c] = rho[c].get<double>();
            const auto& crop = j.at("crop");
            r.crop = {crop.at("x").get<int>(), crop.at("y").get<int>(), crop.at("width").get<int>(),
                      crop.at("height").get<int>()};
            r.canvas_width = j.at("canvas").at("width").get<int>();
            r.canvas_height = j.at("canvas").at("height").get<int>();
            r.source = j.at("source").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            m.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest: ") + e.what(), e.byte);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what(), 0);
    }
    return m;
}

FlowField regenerate_record_flow(const ManifestRecord& record) {
    return crop_flow(flow_field(record.params, record.canvas_width, record.canvas_height), record.crop);
}

DatasetManifest generate_dataset(const SynthConfig& config) {
    config.ranges.validate();
    if (config.per_type_count < 0) throw InvalidInput("synth: count must be >= 0");
    if (config.output_size < 64) throw InvalidInput("synth: output size must be >= 64");
    if (config.types.empty()) throw InvalidInput("synth: no distortion types selected");

    std::vector<std::filesystem::path> paths;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(config.source_dir, ec)) {
        if (entry.is_regular_file() && has_png_extension(entry.path())) paths.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list " + config.source_dir.string() + ": " + ec.message());
    std::sort(paths.begin(), paths.end());

    const int canvas = static_cast<int>(std::lround(config.output_size * config.canvas_scale));
    struct Source {
        std::string id;
        ImageBuffer canvas;
    };
    std::vector<Source> sources;
    for (const auto& p : paths) {
        try {
            sources.push_back({p.filename().string(), prepare_canvas(io::read_png(p), canvas)});
        } catch (const Error& e) {
            std::clog << "warning: skipping source " << p << ": " << e.what() << "\n";
        }
    }
    if (sources.empty()) {
        throw InvalidInput("synth: no usable source images in " + config.source_dir.string());
    }

    std::filesystem::create_directories(config.out_dir / "images");
    std::filesystem::create_directories(config.out_dir / "flows");

    struct Job {
        DistortionType type;
        int index;
    };
    std::vector<Job> jobs;
    for (DistortionType t : config.types)
        for (int i = 0; i < config.per_type_count; ++i) jobs.push_back({t, i});

    std::vector<std::optional<ManifestRecord>> results(jobs.size());
    for_each_row(static_cast<int>(jobs.size()), config.execution, [&](int j) {
        const Job& job = jobs[j];
        const Source& src = sources[static_cast<std::size_t>(j) % sources.size()];
        const std::uint64_t record_seed = mix_seed(config.seed, static_cast<std::uint64_t>(j));
        const CropOptions crop{config.output_size, config.output_size};
        for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
            const std::uint64_t seed = mix_seed(record_seed, static_cast<std::uint64_t>(attempt));
            const DistortionParams params = sample_params(job.type, config.ranges, seed);
            const DistortedPair pair = distort_image(src.canvas, params);
            CroppedPair cropped;
            try {
                cropped = crop_valid(pair.image, pair.flow, crop);
            } catch (const GenerationFailure&) {
                continue;
            }
            const std::string stem = record_stem(job.type, job.index);
            ManifestRecord r;
            r.image = "images/" + stem + ".png";
            r.flow = "flows/" + stem + ".flo";
            r.type = job.type;
            r.params = params;
            r.crop = cropped.rect;
            r.canvas_width = canvas;
            r.canvas_height = canvas;
            r.source = src.id;
            r.seed = seed;
            io::write_png(config.out_dir / r.image, cropped.image);
            io::write_flow(config.out_dir / r.flow, cropped.flow);
            results[j] = std::move(r);
            return;
        }
        std::clog << "warning: no valid crop for " << type_name(job.type) << " record " << job.index
                  << " from " << src.id << " after " << config.max_attempts << " draws; skipped\n";
    });

    DatasetManifest manifest;
    for (auto& r : results)
        if (r) manifest.records.push_back(std::move(*r));
    io::write_text_atomic(config.out_dir / "manifest.json", manifest_to_json(manifest));
    return manifest;
}

}  // namespace geowarp
