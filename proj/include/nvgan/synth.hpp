#pragma once

#include <filesystem>
#include <vector>

#include "nvgan/dataset.hpp"
#include "nvgan/rng.hpp"

namespace nvgan {

struct SynthConfig {
    int64_t samples = 200;
    int64_t rows = 64;
    int64_t cols = 64;
    int64_t ir_channels = 8;              // full resolution
    int64_t nwp_multilevel_channels = 8;  // half resolution
    int64_t nwp_singlelevel_channels = 4; // quarter resolution
    int64_t noise_channels = 1;           // full-resolution pure noise
    uint64_t seed = 1;
    double start_hour = 0.0;
    double hours_per_frame = 1.0;
    double day_start = 7.0;   // visible sensing available in [day_start, day_end]
    double day_end = 17.0;
    double cloud_speed_cols = 2.0;  // advection, pixels per frame
    double cloud_speed_rows = 1.2;
};

struct SynthFrame {
    std::string timestamp;
    double hour = 0.0;
    bool night = false;
    std::vector<Grid> channels;  // native-resolution physical grids, manifest order
    Grid visible;                // 3 x rows x cols, albedo; retained even at night
    Grid cloud;                  // rows x cols reference cloud fraction in [0,1]
};

struct SynthScene {
    SynthConfig cfg;
    std::vector<ChannelSpec> channels;
    std::vector<SynthFrame> frames;
};

// Procedural scene: band-limited cloud and moisture fields advected over time.
// Infrared channels fall monotonically with cloud cover; visible albedo is a
// fixed nonlinear function of cloud and moisture; one channel is pure noise.
// Deterministic for a given config.
SynthScene synth_scene(const SynthConfig& cfg);

// Manifest without file records, for in-memory use.
DatasetManifest scene_manifest(const SynthScene& scene);

std::vector<Sample> scene_to_samples(const SynthScene& scene);

// Writes raw channel files, the manifest, and a README with the recipe.
DatasetManifest write_synthetic_dataset(const SynthScene& scene,
                                        const std::filesystem::path& dir);

}  // namespace nvgan
