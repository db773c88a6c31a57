#include "geowarp/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <random>

namespace geowarp::io {

namespace {

constexpr std::size_t kHeaderBytes = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
    return v;
}

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0F, 1.0F) * 255.0F));
}

}  // namespace

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
    if (flow.width() <= 0 || flow.height() <= 0 || flow.width() > kMaxFlowDimension ||
        flow.height() > kMaxFlowDimension) {
        throw InvalidInput("encode_flow: dimensions out of range");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + flow.pixel_count() * 8);
    put_u32(out, std::bit_cast<std::uint32_t>(kFlowMagic));
    put_u32(out, static_cast<std::uint32_t>(flow.width()));
    put_u32(out, static_cast<std::uint32_t>(flow.height()));
    for (const FlowVector& v : flow.vectors()) {
        put_u32(out, std::bit_cast<std::uint32_t>(v.x));
        put_u32(out, std::bit_cast<std::uint32_t>(v.y));
    }
    return out;
}

FlowField decode_flow(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("flow file: truncated header", bytes.size());
    }
    if (get_u32(bytes, 0) != std::bit_cast<std::uint32_t>(kFlowMagic)) {
        throw FormatError("flow file: bad magic (expected PIEH)", 0);
    }
    const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
    const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
    if (width <= 0 || width > kMaxFlowDimension) {
        throw FormatError("flow file: width " + std::to_string(width) + " out of range", 4);
    }
    if (height <= 0 || height > kMaxFlowDimension) {
        throw FormatError("flow file: height " + std::to_string(height) + " out of range", 8);
    }
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    const std::size_t expected = kHeaderBytes + count * 8;
    if (bytes.size() < expected) {
        throw FormatError("flow file: truncated body, expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()),
                          bytes.size());
    }
    if (bytes.size() > expected) {
        throw FormatError("flow file: trailing bytes after body", expected);
    }

    std::vector<FlowVector> vectors(count);
    std::vector<std::uint8_t> valid;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t off = kHeaderBytes + i * 8;
        const float fx = std::bit_cast<float>(get_u32(bytes, off));
        const float fy = std::bit_cast<float>(get_u32(bytes, off + 4));
        const bool unknown = !std::isfinite(fx) || !std::isfinite(fy) ||
                             std::abs(fx) > kUnknownFlowThreshold ||
                             std::abs(fy) > kUnknownFlowThreshold;
        if (unknown) {
            if (!std::isfinite(fx) || !std::isfinite(fy)) {
                throw FormatError("flow file: non-finite vector", off);
            }
            if (valid.empty()) valid.assign(count, 1);
            valid[i] = 0;
        }
        vectors[i] = {fx, fy};
    }
    return FlowField(width, height, std::move(vectors), std::move(valid));
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
    write_file_atomic(path, encode_flow(flow));
}

FlowField read_flow(const std::filesystem::path& path) { return decode_flow(read_file(path)); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::random_device rd;
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ImageBuffer read_png(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    const bool had_alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    img.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    const int w = static_cast<int>(img.width);
    const int h = static_cast<int>(img.height);
    const int channels = had_alpha ? 4 : 3;
    std::vector<float> data(static_cast<std::size_t>(w) * h * channels);
    std::vector<std::uint8_t> valid;
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        for (int c = 0; c < channels; ++c) data[i * channels + c] = rgba[i * 4 + c] / 255.0F;
        if (had_alpha && rgba[i * 4 + 3] == 0) {
            if (valid.empty()) valid.assign(static_cast<std::size_t>(w) * h, 1);
            valid[i] = 0;
        }
    }
    return ImageBuffer(w, h, channels, std::move(data), std::move(valid));
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
    const bool alpha = image.channels() == 4 || image.has_mask();
    const int out_channels = alpha ? 4 : 3;
    std::vector<std::uint8_t> pixels(image.pixel_count() * out_channels);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * image.width() + x;
            for (int c = 0; c < 3; ++c) pixels[i * out_channels + c] = to_byte(image.at(x, y, c));
            if (alpha) {
                std::uint8_t a = image.channels() == 4 ? to_byte(image.at(x, y, 3)) : 255;
                if (!image.valid(x, y)) a = 0;
                pixels[i * out_channels + 3] = a;
            }
        }
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, pixels.data(), 0, nullptr)) {
        throw IoError("cannot encode PNG " + path.string() + ": " + img.message);
    }
    std::vector<std::uint8_t> encoded(size);
    if (!png_image_write_to_memory(&img, encoded.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError("cannot encode PNG " + path.string() + ": " + img.message);
    }
    encoded.resize(size);
    write_file_atomic(path, encoded);
}

std::filesystem::path PredictionSidecar::flow_path(const std::filesystem::path& sidecar_path) const {
    const std::filesystem::path rel(flow);
    if (rel.is_absolute()) return rel;
    return sidecar_path.parent_path() / rel;
}

PredictionSidecar parse_sidecar(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("sidecar: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) throw FormatError("sidecar: expected a JSON object", 0);

    PredictionSidecar s;
    const auto type_it = doc.find("type");
    if (type_it == doc.end() || !type_it->is_string()) {
        throw FormatError("sidecar: missing string field 'type'", 0);
    }
    const auto type = parse_type(type_it->get<std::string>());
    if (!type) throw FormatError("sidecar: unknown type '" + type_it->get<std::string>() + "'", 0);
    s.type = *type;

    const auto scores_it = doc.find("scores");
    if (scores_it == doc.end() || !scores_it->is_array() || scores_it->size() != 6) {
        throw FormatError("sidecar: 'scores' must be an array of 6 numbers", 0);
    }
    for (std::size_t k = 0; k < 6; ++k) {
        const auto& v = (*scores_it)[k];
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            throw FormatError("sidecar: score " + std::to_string(k) + " is not a finite number", 0);
        }
        s.scores[k] = v.get<double>();
    }

    const auto flow_it = doc.find("flow");
    if (flow_it == doc.end() || !flow_it->is_string() || flow_it->get<std::string>().empty()) {
        throw FormatError("sidecar: missing string field 'flow'", 0);
    }
    s.flow = flow_it->get<std::string>();
    return s;
}

PredictionSidecar read_sidecar(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    PredictionSidecar s = parse_sidecar(std::string(bytes.begin(), bytes.end()));
    const auto flow = s.flow_path(path);
    if (!std::filesystem::exists(flow)) {
        throw IoError("sidecar " + path.string() + " names a missing flow file " + flow.string());
    }
    (void)read_flow(flow);
    return s;
}

std::string sidecar_to_json(const PredictionSidecar& sidecar) {
    nlohmann::json doc;
    doc["type"] = std::string(type_name(sidecar.type));
    doc["scores"] = sidecar.scores;
    doc["flow"] = sidecar.flow;
    return doc.dump(2) + "\n";
}

}  // namespace geowarp::io
