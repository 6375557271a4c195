#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nvgan/grid.hpp"
#include "nvgan/image.hpp"

namespace nvgan {

enum class ChannelCategory { infrared, nwp_multilevel, nwp_singlelevel };

std::string to_string(ChannelCategory category);
ChannelCategory category_from_string(const std::string& text);

struct ChannelSpec {
    std::string name;
    ChannelCategory category = ChannelCategory::infrared;
    int64_t native_rows = 0;
    int64_t native_cols = 0;
    float physical_min = 0.0f;
    float physical_max = 1.0f;
};

struct SampleRecord {
    std::string timestamp;
    double hour = 0.0;  // local hour of day in [0, 24)
    bool night = false;
    std::vector<std::string> channel_files;  // one raw float32 file per channel
    std::string visible_file;                // 3 planes, albedo units
};

struct DatasetManifest {
    int64_t target_rows = 64;
    int64_t target_cols = 64;
    float albedo_min = 0.0f;
    float albedo_max = 1.65f;
    std::vector<ChannelSpec> channels;
    std::vector<SampleRecord> samples;
    std::filesystem::path root;  // directory the manifest lives in
};

// One training pair on the common target lattice, normalized to [-1, 1].
struct Sample {
    Grid x;  // C_in x H x W
    Grid y;  // 3 x H x W
    std::string timestamp;
    double hour = 0.0;
    bool night = false;
};

enum class AblationMode { combined, ir_only, nwp_only };
std::string to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& text);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Raw channel files: flat little-endian float32, row-major.
Grid read_raw_grid(const std::filesystem::path& path, Shape shape);
void write_raw_grid(const std::filesystem::path& path, const Grid& grid);

// Upsamples coarse channels to the target lattice, normalizes each channel to
// [-1, 1] with the manifest statistics, and stacks in manifest order. The
// physical inputs are one grid per channel at native resolution.
Sample assemble_sample(const DatasetManifest& manifest, const std::vector<Grid>& physical,
                       const Grid& visible_albedo, const SampleRecord& record);

Sample load_sample(const DatasetManifest& manifest, int64_t index);

// Zeroes the channels a given ablation arm withholds.
void apply_ablation(Grid& x, const std::vector<ChannelSpec>& channels, AblationMode mode);

// [-1, 1] normalized visible -> albedo in [albedo_min, albedo_max], clamped.
Grid denormalize_visible(const Grid& y_norm, float albedo_min = 0.0f, float albedo_max = 1.65f);
Grid normalize_visible(const Grid& albedo, float albedo_min = 0.0f, float albedo_max = 1.65f);

// Albedo planes stored in channel order CH01 (blue), CH02 (green), CH03 (red);
// pixel = round(albedo / albedo_max * 255), half away from zero.
Image albedo_to_image(const Grid& albedo, float albedo_max = 1.65f);

}  // namespace nvgan
