#include "nvgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "nvgan/autodiff.hpp"

namespace nvgan {

using nlohmann::json;

std::string to_string(ChannelCategory category) {
    switch (category) {
        case ChannelCategory::infrared: return "infrared";
        case ChannelCategory::nwp_multilevel: return "nwp_multilevel";
        case ChannelCategory::nwp_singlelevel: return "nwp_singlelevel";
    }
    return "infrared";
}

ChannelCategory category_from_string(const std::string& text) {
    if (text == "infrared") return ChannelCategory::infrared;
    if (text == "nwp_multilevel") return ChannelCategory::nwp_multilevel;
    if (text == "nwp_singlelevel") return ChannelCategory::nwp_singlelevel;
    throw DataError("unknown channel category: " + text);
}

std::string to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::combined: return "combined";
        case AblationMode::ir_only: return "ir_only";
        case AblationMode::nwp_only: return "nwp_only";
    }
    return "combined";
}

AblationMode ablation_from_string(const std::string& text) {
    if (text == "combined") return AblationMode::combined;
    if (text == "ir_only") return AblationMode::ir_only;
    if (text == "nwp_only") return AblationMode::nwp_only;
    throw ConfigError("unknown ablation mode: " + text + " (expected combined|ir_only|nwp_only)");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest parse error in " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.root = path.parent_path();
    try {
        m.target_rows = j.at("target_grid").at(0).get<int64_t>();
        m.target_cols = j.at("target_grid").at(1).get<int64_t>();
        m.albedo_min = j.at("albedo_range").at(0).get<float>();
        m.albedo_max = j.at("albedo_range").at(1).get<float>();
        for (const auto& cj : j.at("channels")) {
            ChannelSpec spec;
            spec.name = cj.at("name").get<std::string>();
            spec.category = category_from_string(cj.at("category").get<std::string>());
            spec.native_rows = cj.at("native_grid").at(0).get<int64_t>();
            spec.native_cols = cj.at("native_grid").at(1).get<int64_t>();
            spec.physical_min = cj.at("physical_range").at(0).get<float>();
            spec.physical_max = cj.at("physical_range").at(1).get<float>();
            if (!(spec.physical_min < spec.physical_max)) {
                throw DataError("channel " + spec.name + ": physical_min must be < physical_max");
            }
            m.channels.push_back(std::move(spec));
        }
        for (const auto& sj : j.at("samples")) {
            SampleRecord rec;
            rec.timestamp = sj.at("timestamp").get<std::string>();
            rec.hour = sj.at("hour").get<double>();
            rec.night = sj.at("night").get<bool>();
            rec.channel_files = sj.at("channel_files").get<std::vector<std::string>>();
            rec.visible_file = sj.at("visible_file").get<std::string>();
            if (rec.channel_files.size() != m.channels.size()) {
                throw DataError("sample " + rec.timestamp + " lists " +
                                std::to_string(rec.channel_files.size()) + " files for " +
                                std::to_string(m.channels.size()) + " channels");
            }
            m.samples.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + path.string() + " is missing fields: " + e.what());
    }
    for (const auto& rec : m.samples) {
        for (const auto& f : rec.channel_files) {
            if (!std::filesystem::exists(m.root / f)) {
                throw DataError("referenced channel file missing: " + (m.root / f).string());
            }
        }
        if (!std::filesystem::exists(m.root / rec.visible_file)) {
            throw DataError("referenced visible file missing: " +
                            (m.root / rec.visible_file).string());
        }
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["target_grid"] = {manifest.target_rows, manifest.target_cols};
    j["albedo_range"] = {manifest.albedo_min, manifest.albedo_max};
    j["channels"] = json::array();
    for (const auto& spec : manifest.channels) {
        j["channels"].push_back({{"name", spec.name},
                                 {"category", to_string(spec.category)},
                                 {"native_grid", {spec.native_rows, spec.native_cols}},
                                 {"physical_range", {spec.physical_min, spec.physical_max}}});
    }
    j["samples"] = json::array();
    for (const auto& rec : manifest.samples) {
        j["samples"].push_back({{"timestamp", rec.timestamp},
                                {"hour", rec.hour},
                                {"night", rec.night},
                                {"channel_files", rec.channel_files},
                                {"visible_file", rec.visible_file}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

Grid read_raw_grid(const std::filesystem::path& path, Shape shape) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("missing raw file " + path.string());
    const auto bytes = static_cast<size_t>(in.tellg());
    const int64_t expected = shape_numel(shape);
    if (bytes != static_cast<size_t>(expected) * sizeof(float)) {
        throw DataError("raw file " + path.string() + " holds " + std::to_string(bytes) +
                        " bytes, expected " + std::to_string(expected * sizeof(float)) + " for " +
                        shape_to_string(shape));
    }
    in.seekg(0);
    Grid g(std::move(shape));
    in.read(reinterpret_cast<char*>(g.data.data()), static_cast<long>(bytes));
    if (!in) throw DataError("short read from " + path.string());
    for (float v : g.data) {
        if (!std::isfinite(v)) throw DataError("non-finite value in " + path.string());
    }
    return g;
}

void write_raw_grid(const std::filesystem::path& path, const Grid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write raw file " + path.string());
    out.write(reinterpret_cast<const char*>(grid.data.data()),
              static_cast<long>(grid.data.size() * sizeof(float)));
    if (!out) throw DataError("short write to " + path.string());
}

Sample assemble_sample(const DatasetManifest& manifest, const std::vector<Grid>& physical,
                       const Grid& visible_albedo, const SampleRecord& record) {
    if (physical.size() != manifest.channels.size()) {
        throw DataError("assemble_sample: channel count mismatch");
    }
    const int64_t rows = manifest.target_rows, cols = manifest.target_cols;
    Sample s;
    s.timestamp = record.timestamp;
    s.hour = record.hour;
    s.night = record.night;
    s.x = Grid({static_cast<int64_t>(manifest.channels.size()), rows, cols});
    for (size_t c = 0; c < manifest.channels.size(); ++c) {
        const ChannelSpec& spec = manifest.channels[c];
        const Grid& raw = physical[c];
        if (raw.shape != Shape{spec.native_rows, spec.native_cols}) {
            throw DataError("channel " + spec.name + " grid is " + shape_to_string(raw.shape) +
                            ", manifest declares " +
                            shape_to_string({spec.native_rows, spec.native_cols}));
        }
        Grid at_target = (spec.native_rows == rows && spec.native_cols == cols)
                             ? raw
                             : bilinear_resize_value(raw, rows, cols);
        const float lo = spec.physical_min, hi = spec.physical_max;
        const float inv = 2.0f / (hi - lo);
        float* dst = s.x.data.data() + static_cast<int64_t>(c) * rows * cols;
        for (int64_t i = 0; i < rows * cols; ++i) {
            dst[i] = (at_target[i] - lo) * inv - 1.0f;
        }
    }
    if (visible_albedo.shape != Shape{3, rows, cols}) {
        throw DataError("visible grid is " + shape_to_string(visible_albedo.shape) +
                        ", expected " + shape_to_string({3, rows, cols}));
    }
    s.y = normalize_visible(visible_albedo, manifest.albedo_min, manifest.albedo_max);
    return s;
}

Sample load_sample(const DatasetManifest& manifest, int64_t index) {
    if (index < 0 || index >= static_cast<int64_t>(manifest.samples.size())) {
        throw DataError("sample index " + std::to_string(index) + " out of range");
    }
    const SampleRecord& rec = manifest.samples[static_cast<size_t>(index)];
    std::vector<Grid> physical;
    physical.reserve(manifest.channels.size());
    for (size_t c = 0; c < manifest.channels.size(); ++c) {
        const ChannelSpec& spec = manifest.channels[c];
        physical.push_back(read_raw_grid(manifest.root / rec.channel_files[c],
                                         {spec.native_rows, spec.native_cols}));
    }
    Grid visible = read_raw_grid(manifest.root / rec.visible_file,
                                 {3, manifest.target_rows, manifest.target_cols});
    return assemble_sample(manifest, physical, visible, rec);
}

void apply_ablation(Grid& x, const std::vector<ChannelSpec>& channels, AblationMode mode) {
    if (mode == AblationMode::combined) return;
    require_rank(x, 3, "apply_ablation");
    if (x.shape[0] != static_cast<int64_t>(channels.size())) {
        throw ShapeError("apply_ablation: channel count mismatch");
    }
    const int64_t plane = x.shape[1] * x.shape[2];
    for (size_t c = 0; c < channels.size(); ++c) {
        const bool is_ir = channels[c].category == ChannelCategory::infrared;
        const bool keep = (mode == AblationMode::ir_only) ? is_ir : !is_ir;
        if (!keep) {
            float* dst = x.data.data() + static_cast<int64_t>(c) * plane;
            std::fill(dst, dst + plane, 0.0f);
        }
    }
}

Grid denormalize_visible(const Grid& y_norm, float albedo_min, float albedo_max) {
    Grid out(y_norm.shape);
    const float half = 0.5f * (albedo_max - albedo_min);
    for (int64_t i = 0; i < y_norm.size(); ++i) {
        const float v = std::clamp(y_norm[i], -1.0f, 1.0f);
        out[i] = albedo_min + (v + 1.0f) * half;
    }
    return out;
}

Grid normalize_visible(const Grid& albedo, float albedo_min, float albedo_max) {
    Grid out(albedo.shape);
    const float inv = 2.0f / (albedo_max - albedo_min);
    for (int64_t i = 0; i < albedo.size(); ++i) {
        out[i] = (albedo[i] - albedo_min) * inv - 1.0f;
    }
    return out;
}

Image albedo_to_image(const Grid& albedo, float albedo_max) {
    require_rank(albedo, 3, "albedo_to_image");
    if (albedo.shape[0] != 3) {
        throw ShapeError("albedo_to_image: expected 3 channels, got " +
                         std::to_string(albedo.shape[0]));
    }
    const int64_t rows = albedo.shape[1], cols = albedo.shape[2];
    const int64_t plane = rows * cols;
    Image img(rows, cols);
    // Stored plane order is CH01 (blue), CH02 (green), CH03 (red).
    const float* blue = albedo.data.data();
    const float* green = blue + plane;
    const float* red = green + plane;
    auto to_byte = [albedo_max](float v) {
        const float scaled = std::clamp(v / albedo_max, 0.0f, 1.0f) * 255.0f;
        return static_cast<uint8_t>(std::round(scaled));
    };
    for (int64_t i = 0; i < plane; ++i) {
        img.rgb[static_cast<size_t>(i) * 3 + 0] = to_byte(red[i]);
        img.rgb[static_cast<size_t>(i) * 3 + 1] = to_byte(green[i]);
        img.rgb[static_cast<size_t>(i) * 3 + 2] = to_byte(blue[i]);
    }
    return img;
}

}  // namespace nvgan
