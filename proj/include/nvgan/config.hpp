#pragma once

#include <filesystem>
#include <string>

#include "nvgan/metrics.hpp"
#include "nvgan/synth.hpp"
#include "nvgan/trainer.hpp"

namespace nvgan {

// The full parameter tree one command runs with. File values are overridden by
// CLI flags; the resolved tree is echoed into the output directory.
struct RunConfig {
    std::string manifest;
    GeneratorConfig gen;
    std::vector<int64_t> disc_filters = {32, 64, 128, 256};
    LossConfig loss;
    AdamConfig optim;
    TrainConfig train;
    SynthConfig synth;
    SsimConfig ssim;
    std::string out_dir = "runs/out";
};

// Strict parse: any unrecognized key aborts with the offending key named.
RunConfig parse_run_config(const std::filesystem::path& path);

std::string run_config_to_json(const RunConfig& cfg);

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace nvgan
