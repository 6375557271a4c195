#include "nvgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvgan/metrics.hpp"

namespace nvgan {

TrainSession make_session(const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                          const LossConfig& loss_cfg, const AdamConfig& adam_cfg,
                          const TrainConfig& train_cfg, const std::vector<ChannelSpec>& channels,
                          float albedo_min, float albedo_max) {
    if (gen_cfg.in_channels != static_cast<int64_t>(channels.size())) {
        throw ConfigError("model expects " + std::to_string(gen_cfg.in_channels) +
                          " input channels but the dataset provides " +
                          std::to_string(channels.size()));
    }
    if (disc_cfg.condition_channels != gen_cfg.in_channels ||
        disc_cfg.image_channels != gen_cfg.out_channels) {
        throw ConfigError("discriminator channel configuration does not match the generator");
    }
    TrainSession s;
    s.gen_cfg = gen_cfg;
    s.disc_cfg = disc_cfg;
    s.loss_cfg = loss_cfg;
    s.adam_cfg = adam_cfg;
    s.train_cfg = train_cfg;
    s.channels = channels;
    s.albedo_min = albedo_min;
    s.albedo_max = albedo_max;
    Pcg32 init_rng(train_cfg.seed, 0x1417u);
    s.g = build_generator(gen_cfg, init_rng);
    s.d = build_discriminator(disc_cfg, init_rng);
    const auto g_params = s.g.parameters();
    const auto d_params = s.d.parameters();
    s.g_opt = AdamState(adam_cfg, g_params);
    s.d_opt = AdamState(adam_cfg, d_params);
    s.rng = Pcg32(train_cfg.seed, 0x7261696eu);
    return s;
}

TrainSession session_for_manifest(const DatasetManifest& manifest, const GeneratorConfig& gen_cfg,
                                  const LossConfig& loss_cfg, const AdamConfig& adam_cfg,
                                  const TrainConfig& train_cfg) {
    GeneratorConfig g = gen_cfg;
    g.in_channels = static_cast<int64_t>(manifest.channels.size());
    DiscriminatorConfig d;
    d.condition_channels = g.in_channels;
    d.image_channels = g.out_channels;
    return make_session(g, d, loss_cfg, adam_cfg, train_cfg, manifest.channels,
                        manifest.albedo_min, manifest.albedo_max);
}

namespace {

// Stacks the chosen samples into batch grids, applying the ablation mask.
void assemble_batch(const TrainSession& session, const std::vector<Sample>& data,
                    const std::vector<size_t>& order, size_t first, int batch, Grid& x, Grid& y) {
    const Sample& head = data[order[first]];
    const int64_t c_in = head.x.shape[0], rows = head.x.shape[1], cols = head.x.shape[2];
    x = Grid({batch, c_in, rows, cols});
    y = Grid({batch, head.y.shape[0], rows, cols});
    for (int b = 0; b < batch; ++b) {
        const Sample& s = data[order[first + static_cast<size_t>(b)]];
        Grid masked = s.x;
        apply_ablation(masked, session.channels, session.train_cfg.ablate);
        std::copy(masked.data.begin(), masked.data.end(),
                  x.data.begin() + static_cast<int64_t>(b) * c_in * rows * cols);
        std::copy(s.y.data.begin(), s.y.data.end(),
                  y.data.begin() + static_cast<int64_t>(b) * y.shape[1] * rows * cols);
    }
}

double value_l1(const Grid& a, const Grid& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        acc += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

EpochStats train_epoch(TrainSession& session, const std::vector<Sample>& data) {
    if (data.empty()) throw DataError("train_epoch: empty dataset");
    const int batch = session.train_cfg.batch;
    if (batch < 1) throw ConfigError("train_epoch: batch size must be positive");
    if (static_cast<int64_t>(data.size()) < batch) {
        throw DataError("train_epoch: dataset smaller than one batch");
    }
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    session.rng.shuffle(order);

    const auto g_params = session.g.parameters();
    const auto d_params = session.d.parameters();
    EpochStats stats;
    const size_t iterations = data.size() / static_cast<size_t>(batch);
    for (size_t it = 0; it < iterations; ++it) {
        Grid xg, yg;
        assemble_batch(session, data, order, it * static_cast<size_t>(batch), batch, xg, yg);
        NodePtr x = make_leaf(std::move(xg));
        NodePtr y = make_leaf(std::move(yg));

        // Discriminator, real batch.
        zero_grads(g_params);
        zero_grads(d_params);
        NodePtr loss_real = bce_loss(discriminator_apply(session.d, x, y), 1);
        backward(loss_real);
        session.d_opt.step(d_params);

        // Discriminator, generated batch (generator detached).
        NodePtr y_fake = generator_apply(session.g, x, true, session.rng);
        zero_grads(g_params);
        zero_grads(d_params);
        NodePtr loss_fake = bce_loss(discriminator_apply(session.d, x, detach(y_fake)), 0);
        backward(loss_fake);
        session.d_opt.step(d_params);

        // Generator step; discriminator gradients are discarded.
        zero_grads(g_params);
        zero_grads(d_params);
        NodePtr d_on_fake = discriminator_apply(session.d, x, y_fake);
        NodePtr loss_g = generator_loss(d_on_fake, y, y_fake, session.loss_cfg);
        backward(loss_g);
        session.g_opt.step(g_params);

        stats.d_loss += loss_real->value[0] + loss_fake->value[0];
        stats.g_loss += loss_g->value[0];
        stats.l1 += value_l1(y->value, y_fake->value);
        stats.d_steps += 2;
        stats.g_steps += 1;
        stats.iterations += 1;
    }
    if (stats.iterations > 0) {
        stats.d_loss /= static_cast<double>(stats.iterations);
        stats.g_loss /= static_cast<double>(stats.iterations);
        stats.l1 /= static_cast<double>(stats.iterations);
    }
    session.epoch += 1;
    return stats;
}

std::vector<Sample> training_split(const TrainSession& session, const std::vector<Sample>& all) {
    std::vector<Sample> out;
    for (const Sample& s : all) {
        if (!s.night && s.hour >= session.train_cfg.train_hour_lo &&
            s.hour <= session.train_cfg.train_hour_hi) {
            out.push_back(s);
        }
    }
    return out;
}

Grid synthesize(TrainSession& session, const Sample& sample) {
    Grid masked = sample.x;
    apply_ablation(masked, session.channels, session.train_cfg.ablate);
    Grid x({1, masked.shape[0], masked.shape[1], masked.shape[2]}, masked.data);
    Grid y_norm = generator_forward(session.g, x, false, session.rng);
    Grid y3({y_norm.shape[1], y_norm.shape[2], y_norm.shape[3]}, y_norm.data);
    return denormalize_visible(y3, session.albedo_min, session.albedo_max);
}

double mean_albedo_mae(TrainSession& session, const std::vector<Sample>& samples) {
    if (samples.empty()) throw DataError("mean_albedo_mae: no samples");
    double acc = 0.0;
    for (const Sample& s : samples) {
        const Grid truth = denormalize_visible(s.y, session.albedo_min, session.albedo_max);
        acc += mae(truth, synthesize(session, s));
    }
    return acc / static_cast<double>(samples.size());
}

double persistence_night_mae(const std::vector<Sample>& all, float albedo_min, float albedo_max) {
    double acc = 0.0;
    int64_t count = 0;
    int64_t last_day = -1;
    for (size_t i = 0; i < all.size(); ++i) {
        if (!all[i].night) {
            last_day = static_cast<int64_t>(i);
            continue;
        }
        if (last_day < 0) continue;  // night before any observed day frame
        const Grid truth = denormalize_visible(all[i].y, albedo_min, albedo_max);
        const Grid held = denormalize_visible(all[static_cast<size_t>(last_day)].y, albedo_min,
                                              albedo_max);
        acc += mae(truth, held);
        ++count;
    }
    if (count == 0) throw DataError("persistence_night_mae: no scorable night frames");
    return acc / static_cast<double>(count);
}

std::vector<std::pair<std::string, Grid*>> named_state(TrainSession& session) {
    std::vector<std::pair<std::string, Grid*>> out;
    for (auto& [name, grid] : session.g.named_buffers()) out.emplace_back("g." + name, grid);
    for (auto& [name, grid] : session.d.named_buffers()) out.emplace_back("d." + name, grid);
    auto add_moments = [&out](const std::string& prefix, AdamState& opt) {
        auto& m = opt.first_moments();
        auto& v = opt.second_moments();
        for (size_t i = 0; i < m.size(); ++i) {
            out.emplace_back(prefix + ".m" + std::to_string(i), &m[i]);
        }
        for (size_t i = 0; i < v.size(); ++i) {
            out.emplace_back(prefix + ".v" + std::to_string(i), &v[i]);
        }
    };
    add_moments("opt_g", session.g_opt);
    add_moments("opt_d", session.d_opt);
    return out;
}

}  // namespace nvgan
