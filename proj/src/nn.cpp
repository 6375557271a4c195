#include "nvgan/nn.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"

namespace nvgan {

namespace {

Grid normal_grid(Shape shape, float mean, float stddev, Pcg32& rng) {
    Grid g(std::move(shape));
    for (float& x : g.data) x = rng.normal(mean, stddev);
    return g;
}

// A bias in front of batch statistics normalization is redundant (the
// normalization removes it, and beta takes its place), so norm-followed convs
// carry a fixed zero bias instead of a trainable one.
Conv2dLayer make_conv(int64_t out_ch, int64_t in_ch, int kernel, int stride, int padding,
                      Pcg32& rng, bool trainable_bias) {
    Conv2dLayer layer;
    layer.kernel = make_param(normal_grid({out_ch, in_ch, kernel, kernel}, 0.0f, 0.02f, rng));
    layer.bias = make_leaf(Grid({out_ch}), trainable_bias);
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

// Transposed conv kernels are laid out in_ch x out_ch x Kh x Kw.
Conv2dLayer make_tconv(int64_t in_ch, int64_t out_ch, int kernel, int stride, int padding,
                       Pcg32& rng, bool trainable_bias) {
    Conv2dLayer layer;
    layer.kernel = make_param(normal_grid({in_ch, out_ch, kernel, kernel}, 0.0f, 0.02f, rng));
    layer.bias = make_leaf(Grid({out_ch}), trainable_bias);
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

BatchNormLayer make_norm(int64_t channels, Pcg32& rng) {
    BatchNormLayer norm;
    norm.gamma = make_param(normal_grid({channels}, 1.0f, 0.02f, rng));
    norm.beta = make_param(Grid({channels}));
    norm.running_mean = Grid({channels});
    norm.running_var = Grid::full({channels}, 1.0f);
    return norm;
}

void push_conv(std::vector<NodePtr>& out, const Conv2dLayer& layer) {
    out.push_back(layer.kernel);
    if (layer.bias->requires_grad) out.push_back(layer.bias);
}

void push_norm(std::vector<NodePtr>& out, const std::optional<BatchNormLayer>& norm) {
    if (norm) {
        out.push_back(norm->gamma);
        out.push_back(norm->beta);
    }
}

void name_conv(std::vector<std::pair<std::string, Grid*>>& out, const std::string& prefix,
               Conv2dLayer& layer) {
    out.emplace_back(prefix + ".kernel", &layer.kernel->value);
    if (layer.bias->requires_grad) out.emplace_back(prefix + ".bias", &layer.bias->value);
}

void name_norm(std::vector<std::pair<std::string, Grid*>>& out, const std::string& prefix,
               std::optional<BatchNormLayer>& norm) {
    if (!norm) return;
    out.emplace_back(prefix + ".gamma", &norm->gamma->value);
    out.emplace_back(prefix + ".beta", &norm->beta->value);
    out.emplace_back(prefix + ".running_mean", &norm->running_mean);
    out.emplace_back(prefix + ".running_var", &norm->running_var);
}

}  // namespace

GeneratorNet build_generator(const GeneratorConfig& cfg, Pcg32& rng) {
    if (cfg.depth < 2) throw ConfigError("generator depth must be >= 2");
    if (static_cast<int>(cfg.encoder_filters.size()) != cfg.depth) {
        throw ConfigError("encoder_filters must list one width per depth level");
    }
    if (cfg.se_reduction < 1) throw ConfigError("se_reduction must be >= 1");
    GeneratorNet g;
    g.cfg = cfg;

    const int64_t c = cfg.in_channels;
    g.se.channels = c;
    g.se.reduction = cfg.se_reduction;
    g.se.single_layer = cfg.se_single_layer;
    g.se.last_weights = Grid({c});
    if (cfg.se_single_layer) {
        g.se.fc2_weight = make_param(normal_grid({c, c}, 0.0f, 0.1f, rng));
        g.se.fc2_bias = make_param(Grid({c}));
    } else {
        const int64_t r = std::max<int64_t>(1, c / cfg.se_reduction);
        g.se.fc1_weight = make_param(normal_grid({r, c}, 0.0f, 0.1f, rng));
        g.se.fc1_bias = make_param(Grid::full({r}, 0.1f));
        g.se.fc2_weight = make_param(normal_grid({c, r}, 0.0f, 0.1f, rng));
        g.se.fc2_bias = make_param(Grid({c}));
    }

    const int n = cfg.depth;
    int64_t in_ch = c + (cfg.noise_channel ? 1 : 0);
    for (int i = 0; i < n; ++i) {
        EncoderLevel level;
        level.conv = make_conv(cfg.encoder_filters[i], in_ch, cfg.kernel, 2, 1, rng, i == 0);
        if (i > 0) level.norm = make_norm(cfg.encoder_filters[i], rng);
        in_ch = cfg.encoder_filters[i];
        g.encoder.push_back(std::move(level));
    }
    // Decoder level i mirrors encoder level n-2-i; the last level emits the image.
    in_ch = cfg.encoder_filters[n - 1];
    for (int i = 0; i < n; ++i) {
        DecoderLevel level;
        const bool output_level = (i == n - 1);
        const int64_t out_ch = output_level ? cfg.out_channels : cfg.encoder_filters[n - 2 - i];
        level.tconv = make_tconv(in_ch, out_ch, cfg.kernel, 2, 1, rng, output_level);
        if (!output_level) {
            level.norm = make_norm(out_ch, rng);
            level.dropout = i < cfg.dropout_levels;
            in_ch = out_ch + cfg.encoder_filters[n - 2 - i];  // skip concat
        }
        g.decoder.push_back(std::move(level));
    }
    return g;
}

DiscriminatorNet build_discriminator(const DiscriminatorConfig& cfg, Pcg32& rng) {
    if (cfg.filters.empty()) throw ConfigError("discriminator needs at least one conv layer");
    DiscriminatorNet d;
    d.cfg = cfg;
    int64_t in_ch = cfg.condition_channels + cfg.image_channels;
    for (int64_t f : cfg.filters) {
        d.convs.push_back(make_conv(f, in_ch, cfg.kernel, 2, 1, rng, true));
        in_ch = f;
    }
    d.head_weight = make_param(normal_grid({1, in_ch}, 0.0f, 0.02f, rng));
    d.head_bias = make_param(Grid({1}));
    return d;
}

std::vector<NodePtr> GeneratorNet::parameters() const {
    std::vector<NodePtr> out;
    if (!se.single_layer) {
        out.push_back(se.fc1_weight);
        out.push_back(se.fc1_bias);
    }
    out.push_back(se.fc2_weight);
    out.push_back(se.fc2_bias);
    for (const auto& level : encoder) {
        push_conv(out, level.conv);
        push_norm(out, level.norm);
    }
    for (const auto& level : decoder) {
        push_conv(out, level.tconv);
        push_norm(out, level.norm);
    }
    return out;
}

std::vector<std::pair<std::string, Grid*>> GeneratorNet::named_buffers() {
    std::vector<std::pair<std::string, Grid*>> out;
    if (!se.single_layer) {
        out.emplace_back("se.fc1_weight", &se.fc1_weight->value);
        out.emplace_back("se.fc1_bias", &se.fc1_bias->value);
    }
    out.emplace_back("se.fc2_weight", &se.fc2_weight->value);
    out.emplace_back("se.fc2_bias", &se.fc2_bias->value);
    for (size_t i = 0; i < encoder.size(); ++i) {
        const std::string prefix = "encoder" + std::to_string(i);
        name_conv(out, prefix, encoder[i].conv);
        name_norm(out, prefix + ".norm", encoder[i].norm);
    }
    for (size_t i = 0; i < decoder.size(); ++i) {
        const std::string prefix = "decoder" + std::to_string(i);
        name_conv(out, prefix, decoder[i].tconv);
        name_norm(out, prefix + ".norm", decoder[i].norm);
    }
    return out;
}

std::vector<NodePtr> DiscriminatorNet::parameters() const {
    std::vector<NodePtr> out;
    for (const auto& conv : convs) push_conv(out, conv);
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

std::vector<std::pair<std::string, Grid*>> DiscriminatorNet::named_buffers() {
    std::vector<std::pair<std::string, Grid*>> out;
    for (size_t i = 0; i < convs.size(); ++i) {
        name_conv(out, "conv" + std::to_string(i), convs[i]);
    }
    out.emplace_back("head.weight", &head_weight->value);
    out.emplace_back("head.bias", &head_bias->value);
    return out;
}

std::pair<NodePtr, NodePtr> se_apply(SEBlock& se, const NodePtr& input) {
    require_rank(input->value, 4, "se_apply");
    if (input->value.shape[1] != se.channels) {
        throw ShapeError("se_apply: block configured for " + std::to_string(se.channels) +
                         " channels, input has " + std::to_string(input->value.shape[1]));
    }
    const int64_t batch = input->value.shape[0];
    NodePtr desc = reshape(global_avg_pool(input), {batch, se.channels});
    NodePtr weights;
    if (se.single_layer) {
        weights = sigmoid(dense(desc, se.fc2_weight, se.fc2_bias));
    } else {
        NodePtr hidden = relu(dense(desc, se.fc1_weight, se.fc1_bias));
        weights = sigmoid(dense(hidden, se.fc2_weight, se.fc2_bias));
    }
    NodePtr scaled = mul(input, reshape(weights, {batch, se.channels, 1, 1}));

    for (int64_t c = 0; c < se.channels; ++c) {
        double acc = 0.0;
        for (int64_t b = 0; b < batch; ++b) acc += weights->value[b * se.channels + c];
        se.last_weights[c] = static_cast<float>(acc / static_cast<double>(batch));
    }
    se.has_forward = true;
    return {scaled, weights};
}

NodePtr generator_apply(GeneratorNet& g, const NodePtr& x, bool training, Pcg32& rng) {
    require_rank(x->value, 4, "generator_apply");
    if (x->value.shape[1] != g.cfg.in_channels) {
        throw ShapeError("generator_apply: expected " + std::to_string(g.cfg.in_channels) +
                         " input channels, got " + std::to_string(x->value.shape[1]));
    }
    const int64_t rows = x->value.shape[2], cols = x->value.shape[3];
    const int64_t div = int64_t{1} << g.cfg.depth;
    if (rows % div != 0 || cols % div != 0) {
        throw ConfigError("generator_apply: spatial extents " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " must be divisible by 2^depth = " +
                          std::to_string(div));
    }
    auto [h, weights] = se_apply(g.se, x);
    (void)weights;
    if (g.cfg.noise_channel) {
        Grid z({x->value.shape[0], 1, rows, cols});
        if (training) {
            for (float& v : z.data) v = rng.normal();
        }
        h = concat_channels(h, make_leaf(std::move(z)));
    }
    std::vector<NodePtr> skips;
    for (auto& level : g.encoder) {
        h = conv2d(h, level.conv.kernel, level.conv.bias, level.conv.stride, level.conv.padding);
        if (level.norm) {
            h = batch_norm(h, level.norm->gamma, level.norm->beta, level.norm->running_mean,
                           level.norm->running_var, training, level.norm->momentum,
                           level.norm->eps);
        }
        h = leaky_relu(h, 0.2f);
        skips.push_back(h);
    }
    const int n = g.cfg.depth;
    for (int i = 0; i < n; ++i) {
        auto& level = g.decoder[static_cast<size_t>(i)];
        h = conv2d_transpose(h, level.tconv.kernel, level.tconv.bias, level.tconv.stride,
                             level.tconv.padding);
        if (i == n - 1) {
            h = tanh_act(h);
            break;
        }
        if (level.norm) {
            h = batch_norm(h, level.norm->gamma, level.norm->beta, level.norm->running_mean,
                           level.norm->running_var, training, level.norm->momentum,
                           level.norm->eps);
        }
        if (level.dropout) h = dropout(h, g.cfg.dropout_rate, rng, training);
        h = relu(h);
        h = concat_channels(h, skips[static_cast<size_t>(n - 2 - i)]);
    }
    return h;
}

NodePtr discriminator_apply(DiscriminatorNet& d, const NodePtr& x, const NodePtr& y) {
    require_rank(x->value, 4, "discriminator_apply");
    require_rank(y->value, 4, "discriminator_apply");
    if (x->value.shape[0] != y->value.shape[0] || x->value.shape[2] != y->value.shape[2] ||
        x->value.shape[3] != y->value.shape[3]) {
        throw ShapeError("discriminator_apply: condition and candidate must share batch and "
                         "spatial extents");
    }
    NodePtr h = concat_channels(x, y);
    for (auto& conv : d.convs) {
        h = conv2d(h, conv.kernel, conv.bias, conv.stride, conv.padding);
        h = leaky_relu(h, 0.2f);
    }
    const int64_t batch = h->value.shape[0];
    const int64_t feats = h->value.shape[1];
    h = reshape(global_avg_pool(h), {batch, feats});
    return sigmoid(dense(h, d.head_weight, d.head_bias));
}

std::pair<Grid, Grid> se_forward(SEBlock& se, const Grid& input) {
    NoGradGuard guard;
    auto [scaled, weights] = se_apply(se, make_leaf(input));
    return {scaled->value, weights->value};
}

Grid generator_forward(GeneratorNet& g, const Grid& x, bool training, Pcg32& rng) {
    if (training) return generator_apply(g, make_leaf(x), true, rng)->value;
    NoGradGuard guard;
    return generator_apply(g, make_leaf(x), false, rng)->value;
}

Grid discriminator_forward(DiscriminatorNet& d, const Grid& x, const Grid& y) {
    NoGradGuard guard;
    return discriminator_apply(d, make_leaf(x), make_leaf(y))->value;
}

void verify_generator_structure(const GeneratorNet& g) {
    const int n = g.cfg.depth;
    for (int i = 0; i + 1 < n; ++i) {
        const auto& level = g.decoder[static_cast<size_t>(i)];
        const int64_t up_ch = level.tconv.kernel->value.shape[1];
        const int64_t skip_ch = g.encoder[static_cast<size_t>(n - 2 - i)]
                                    .conv.kernel->value.shape[0];
        const int64_t next_in = g.decoder[static_cast<size_t>(i + 1)].tconv.kernel->value.shape[0];
        if (next_in != up_ch + skip_ch) {
            throw ShapeError("skip wiring broken at decoder level " + std::to_string(i) + ": " +
                             std::to_string(next_in) + " != " + std::to_string(up_ch) + " + " +
                             std::to_string(skip_ch));
        }
    }
}

AttentionReport attention_weights(const GeneratorNet& g, const std::vector<ChannelLabel>& labels) {
    if (!g.se.has_forward) {
        throw StateError("attention_weights: no forward pass has populated the SE weights yet");
    }
    if (static_cast<int64_t>(labels.size()) != g.se.channels) {
        throw ShapeError("attention_weights: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(g.se.channels) + " channels");
    }
    AttentionReport report;
    std::map<std::string, std::pair<double, int>> grouped;
    std::vector<std::string> group_order;
    for (size_t i = 0; i < labels.size(); ++i) {
        AttentionEntry entry;
        entry.name = labels[i].name;
        entry.category = labels[i].category;
        entry.weight = g.se.last_weights[static_cast<int64_t>(i)];
        report.channels.push_back(entry);
        auto it = grouped.find(entry.category);
        if (it == grouped.end()) {
            grouped.emplace(entry.category, std::make_pair(entry.weight, 1));
            group_order.push_back(entry.category);
        } else {
            it->second.first += entry.weight;
            it->second.second += 1;
        }
    }
    for (const auto& name : group_order) {
        const auto& [sum, count] = grouped[name];
        report.groups.push_back(
            {name, static_cast<float>(sum / count), count});
    }
    return report;
}

std::string AttentionReport::to_text() const {
    std::ostringstream os;
    os << "channel-attention weights (aggregation: " << aggregation << ")\n";
    os << "category means:\n";
    for (const auto& group : groups) {
        os << "  " << group.category << ": " << group.mean_weight << " (" << group.count
           << " channels)\n";
    }
    os << "per-channel weights:\n";
    for (const auto& entry : channels) {
        os << "  " << entry.name << " [" << entry.category << "]: " << entry.weight << "\n";
    }
    return os.str();
}

std::string AttentionReport::to_json() const {
    nlohmann::json j;
    j["aggregation"] = aggregation;
    for (const auto& entry : channels) {
        j["channels"].push_back(
            {{"name", entry.name}, {"category", entry.category}, {"weight", entry.weight}});
    }
    for (const auto& group : groups) {
        j["groups"].push_back({{"category", group.category},
                               {"mean_weight", group.mean_weight},
                               {"count", group.count}});
    }
    return j.dump(2);
}

}  // namespace nvgan
