#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvgan/autodiff.hpp"

namespace nvgan {

struct GeneratorConfig {
    int depth = 5;
    std::vector<int64_t> encoder_filters = {32, 64, 128, 256, 256};
    int kernel = 4;
    int64_t in_channels = 21;
    int64_t out_channels = 3;
    int se_reduction = 4;
    bool se_single_layer = false;
    float dropout_rate = 0.5f;
    int dropout_levels = 3;      // innermost decoder levels carrying dropout
    bool noise_channel = false;  // append a unit-Gaussian channel after the SE front
};

struct DiscriminatorConfig {
    std::vector<int64_t> filters = {32, 64, 128, 256};
    int kernel = 4;
    int64_t condition_channels = 21;  // candidate image channels are added on top
    int64_t image_channels = 3;
};

struct Conv2dLayer {
    NodePtr kernel;
    NodePtr bias;
    int stride = 2;
    int padding = 1;
};

struct BatchNormLayer {
    NodePtr gamma;
    NodePtr beta;
    Grid running_mean;
    Grid running_var;
    float momentum = 0.1f;
    float eps = 1e-5f;
};

// Channel attention front: squeeze via global average pooling, excitation via
// a small fully connected map, sigmoid weights, multiplicative recalibration.
struct SEBlock {
    int64_t channels = 0;
    int reduction = 4;
    bool single_layer = false;
    NodePtr fc1_weight, fc1_bias;  // absent in single-layer mode
    NodePtr fc2_weight, fc2_bias;
    Grid last_weights;  // batch-averaged excitation of the most recent forward
    bool has_forward = false;
};

struct EncoderLevel {
    Conv2dLayer conv;
    std::optional<BatchNormLayer> norm;
};

struct DecoderLevel {
    Conv2dLayer tconv;
    std::optional<BatchNormLayer> norm;
    bool dropout = false;
};

struct GeneratorNet {
    GeneratorConfig cfg;
    SEBlock se;
    std::vector<EncoderLevel> encoder;
    std::vector<DecoderLevel> decoder;

    std::vector<NodePtr> parameters() const;
    // Parameters plus running statistics, in declaration order, for checkpoints.
    std::vector<std::pair<std::string, Grid*>> named_buffers();
};

struct DiscriminatorNet {
    DiscriminatorConfig cfg;
    std::vector<Conv2dLayer> convs;
    NodePtr head_weight, head_bias;

    std::vector<NodePtr> parameters() const;
    std::vector<std::pair<std::string, Grid*>> named_buffers();
};

GeneratorNet build_generator(const GeneratorConfig& cfg, Pcg32& rng);
DiscriminatorNet build_discriminator(const DiscriminatorConfig& cfg, Pcg32& rng);

// Graph-building forms used by the training loop.
std::pair<NodePtr, NodePtr> se_apply(SEBlock& se, const NodePtr& input);
NodePtr generator_apply(GeneratorNet& g, const NodePtr& x, bool training, Pcg32& rng);
NodePtr discriminator_apply(DiscriminatorNet& d, const NodePtr& x, const NodePtr& y);

// Value-level forms. se_forward returns (recalibrated input, per-sample weights).
std::pair<Grid, Grid> se_forward(SEBlock& se, const Grid& input);
Grid generator_forward(GeneratorNet& g, const Grid& x, bool training, Pcg32& rng);
Grid discriminator_forward(DiscriminatorNet& d, const Grid& x, const Grid& y);

// Structural skip-wiring check: every decoder level must consume its own
// upsampled channels plus the mirrored encoder level's channels.
void verify_generator_structure(const GeneratorNet& g);

struct ChannelLabel {
    std::string name;
    std::string category;
};

struct AttentionEntry {
    std::string name;
    std::string category;
    float weight = 0.0f;
};

struct AttentionGroup {
    std::string category;
    float mean_weight = 0.0f;
    int count = 0;
};

struct AttentionReport {
    std::vector<AttentionEntry> channels;  // per-channel raw weights
    std::vector<AttentionGroup> groups;    // per-category aggregation
    std::string aggregation = "mean";

    std::string to_text() const;
    std::string to_json() const;
};

// Requires a prior forward pass so that last_weights is populated.
AttentionReport attention_weights(const GeneratorNet& g,
                                  const std::vector<ChannelLabel>& labels);

}  // namespace nvgan
