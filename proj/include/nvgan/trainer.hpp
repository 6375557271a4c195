#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvgan/adam.hpp"
#include "nvgan/dataset.hpp"
#include "nvgan/loss.hpp"
#include "nvgan/nn.hpp"

namespace nvgan {

struct TrainConfig {
    int epochs = 300;
    int batch = 8;
    uint64_t seed = 1;
    AblationMode ablate = AblationMode::combined;
    int checkpoint_every = 0;  // 0: only final
    double train_hour_lo = 8.0;
    double train_hour_hi = 17.0;
};

struct EpochStats {
    double d_loss = 0.0;  // bce(real,1) + bce(fake,0), iteration mean
    double g_loss = 0.0;  // full generator objective, iteration mean
    double l1 = 0.0;      // reconstruction term alone, iteration mean
    int64_t d_steps = 0;
    int64_t g_steps = 0;
    int64_t iterations = 0;
};

// Everything one training run owns: the two networks, optimizer states, the
// RNG that drives shuffling and dropout, and the dataset statistics needed to
// reproduce normalization at inference time.
struct TrainSession {
    GeneratorConfig gen_cfg;
    DiscriminatorConfig disc_cfg;
    LossConfig loss_cfg;
    AdamConfig adam_cfg;
    TrainConfig train_cfg;
    std::vector<ChannelSpec> channels;
    float albedo_min = 0.0f;
    float albedo_max = 1.65f;

    GeneratorNet g;
    DiscriminatorNet d;
    AdamState g_opt;
    AdamState d_opt;
    Pcg32 rng;
    int64_t epoch = 0;
};

TrainSession make_session(const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                          const LossConfig& loss_cfg, const AdamConfig& adam_cfg,
                          const TrainConfig& train_cfg, const std::vector<ChannelSpec>& channels,
                          float albedo_min = 0.0f, float albedo_max = 1.65f);

// Convenience: session wired to a dataset manifest with library defaults.
TrainSession session_for_manifest(const DatasetManifest& manifest, const GeneratorConfig& gen_cfg,
                                  const LossConfig& loss_cfg, const AdamConfig& adam_cfg,
                                  const TrainConfig& train_cfg);

// One pass over the data: per iteration the discriminator takes one step on a
// real batch and one on a generated batch, then the generator takes one step.
// Incomplete trailing batches are dropped.
EpochStats train_epoch(TrainSession& session, const std::vector<Sample>& data);

// Samples whose hour falls inside the configured training window (day frames).
std::vector<Sample> training_split(const TrainSession& session, const std::vector<Sample>& all);

// Deterministic inference for one sample; applies the session's ablation mask
// and returns denormalized albedo (3 x H x W).
Grid synthesize(TrainSession& session, const Sample& sample);

// Mean synthesized-vs-truth MAE in albedo units over the given samples.
double mean_albedo_mae(TrainSession& session, const std::vector<Sample>& samples);

// Persistence baseline: each night frame is forecast as the most recent day
// frame's visible image; returns mean MAE in albedo units over night frames.
double persistence_night_mae(const std::vector<Sample>& all, float albedo_min = 0.0f,
                             float albedo_max = 1.65f);

// Checkpoint file: magic "NVGANCK1", little-endian header (version, config,
// shapes table, RNG state, counters, CRC32), then raw float32 buffers in
// declaration order.
void save_checkpoint(TrainSession& session, const std::filesystem::path& path);
TrainSession load_checkpoint(const std::filesystem::path& path);

// All persistent buffers (parameters, running statistics, Adam moments) in
// declaration order with stable names.
std::vector<std::pair<std::string, Grid*>> named_state(TrainSession& session);

}  // namespace nvgan
