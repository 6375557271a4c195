// Command-line entry point: synthetic data generation, training, inference,
// evaluation, and attention reporting as reproducible runs.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvgan/config.hpp"
#include "nvgan/flow.hpp"

namespace fs = std::filesystem;
using namespace nvgan;

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    std::string manifest;
    std::vector<std::string> checkpoints;
    std::string ablate;
    std::string range;
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> batch;
    int64_t sample_index = 0;
};

RunConfig resolve_config(const CliArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = parse_run_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.manifest.empty()) cfg.manifest = args.manifest;
    if (args.seed) {
        cfg.train.seed = *args.seed;
        cfg.synth.seed = *args.seed;
    }
    if (args.epochs) cfg.train.epochs = *args.epochs;
    if (args.batch) cfg.train.batch = *args.batch;
    if (!args.ablate.empty()) cfg.train.ablate = ablation_from_string(args.ablate);
    return cfg;
}

std::vector<Sample> load_all_samples(const DatasetManifest& manifest) {
    std::vector<Sample> out;
    out.reserve(manifest.samples.size());
    for (int64_t i = 0; i < static_cast<int64_t>(manifest.samples.size()); ++i) {
        out.push_back(load_sample(manifest, i));
    }
    return out;
}

std::vector<ChannelLabel> channel_labels(const std::vector<ChannelSpec>& specs) {
    std::vector<ChannelLabel> labels;
    for (const auto& spec : specs) labels.push_back({spec.name, to_string(spec.category)});
    return labels;
}

void check_compatible(const TrainSession& session, const DatasetManifest& manifest) {
    if (session.channels.size() != manifest.channels.size()) {
        throw ConfigError("checkpoint was trained with " +
                          std::to_string(session.channels.size()) +
                          " channels, manifest provides " +
                          std::to_string(manifest.channels.size()));
    }
}

int cmd_make_synthetic(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    const SynthScene scene = synth_scene(cfg.synth);
    write_synthetic_dataset(scene, cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << "wrote " << scene.frames.size() << " samples, "
              << scene.channels.size() << " channels to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_train(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    if (cfg.manifest.empty()) throw ConfigError("train needs a dataset manifest (--manifest)");
    const DatasetManifest manifest = load_manifest(cfg.manifest);

    TrainSession session;
    if (!args.checkpoints.empty()) {
        session = load_checkpoint(args.checkpoints.front());
        check_compatible(session, manifest);
        session.train_cfg.epochs = cfg.train.epochs;
    } else {
        GeneratorConfig gen = cfg.gen;
        DiscriminatorConfig disc;
        disc.filters = cfg.disc_filters;
        disc.kernel = cfg.gen.kernel;
        gen.in_channels = static_cast<int64_t>(manifest.channels.size());
        disc.condition_channels = gen.in_channels;
        disc.image_channels = gen.out_channels;
        session = make_session(gen, disc, cfg.loss, cfg.optim, cfg.train, manifest.channels,
                               manifest.albedo_min, manifest.albedo_max);
    }

    const std::vector<Sample> all = load_all_samples(manifest);
    const std::vector<Sample> train_set = training_split(session, all);
    if (train_set.empty()) throw DataError("no samples inside the training hour window");

    fs::create_directories(cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);
    std::ofstream log(fs::path(cfg.out_dir) / "train_log.txt", std::ios::app);
    while (session.epoch < session.train_cfg.epochs) {
        const EpochStats stats = train_epoch(session, train_set);
        std::ostringstream line;
        line << "epoch " << session.epoch << " d_loss " << stats.d_loss << " g_loss "
             << stats.g_loss << " l1 " << stats.l1;
        std::cout << line.str() << "\n";
        log << line.str() << "\n";
        if (session.train_cfg.checkpoint_every > 0 &&
            session.epoch % session.train_cfg.checkpoint_every == 0 &&
            session.epoch < session.train_cfg.epochs) {
            save_checkpoint(session, fs::path(cfg.out_dir) /
                                         ("checkpoint_epoch" + std::to_string(session.epoch) +
                                          ".ckpt"));
        }
    }
    save_checkpoint(session, fs::path(cfg.out_dir) / "checkpoint.ckpt");
    std::cout << "saved " << (fs::path(cfg.out_dir) / "checkpoint.ckpt").string() << "\n";
    return 0;
}

std::pair<int64_t, int64_t> parse_range(const std::string& text, int64_t n) {
    if (text.empty()) return {0, n};
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ConfigError("range must look like start:end, got " + text);
    }
    const int64_t lo = std::stoll(text.substr(0, colon));
    const int64_t hi = std::stoll(text.substr(colon + 1));
    if (lo < 0 || hi > n || lo >= hi) throw ConfigError("range " + text + " out of bounds");
    return {lo, hi};
}

int cmd_infer(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    if (args.checkpoints.empty()) throw ConfigError("infer needs --checkpoint");
    if (cfg.manifest.empty()) throw ConfigError("infer needs a dataset manifest (--manifest)");
    TrainSession session = load_checkpoint(args.checkpoints.front());
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    check_compatible(session, manifest);

    fs::create_directories(cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);
    const auto [lo, hi] = parse_range(args.range, static_cast<int64_t>(manifest.samples.size()));

    // Panel rows mirror the figure layout: real visible, synthetic visible,
    // one infrared channel, one coarse NWP cloud channel.
    int64_t ir_index = -1, cloud_index = -1;
    for (size_t c = 0; c < manifest.channels.size(); ++c) {
        if (ir_index < 0 && manifest.channels[c].category == ChannelCategory::infrared) {
            ir_index = static_cast<int64_t>(c);
        }
        if (cloud_index < 0 && manifest.channels[c].name.starts_with("cloud_cover")) {
            cloud_index = static_cast<int64_t>(c);
        }
    }
    for (int64_t i = lo; i < hi; ++i) {
        const Sample sample = load_sample(manifest, i);
        const Grid synth = synthesize(session, sample);
        const Grid truth = denormalize_visible(sample.y, manifest.albedo_min,
                                               manifest.albedo_max);
        const std::string stem = "sample" + std::to_string(i) +
                                 (sample.night ? "_night" : "_day");
        write_raw_grid(fs::path(cfg.out_dir) / (stem + "_albedo.raw"), synth);

        std::vector<Image> rows;
        rows.push_back(albedo_to_image(truth, manifest.albedo_max));
        rows.push_back(albedo_to_image(synth, manifest.albedo_max));
        const int64_t plane = sample.x.shape[1] * sample.x.shape[2];
        auto channel_plane = [&](int64_t c) {
            Grid p({sample.x.shape[1], sample.x.shape[2]});
            std::copy(sample.x.data.begin() + c * plane, sample.x.data.begin() + (c + 1) * plane,
                      p.data.begin());
            return p;
        };
        if (ir_index >= 0) {
            rows.push_back(grid_to_grayscale(channel_plane(ir_index), -1.0f, 1.0f));
        }
        if (cloud_index >= 0) {
            rows.push_back(grid_to_grayscale(channel_plane(cloud_index), -1.0f, 1.0f));
        }
        write_png(fs::path(cfg.out_dir) / (stem + ".png"), vstack(rows));
    }
    std::cout << "wrote panels for samples [" << lo << ", " << hi << ") to " << cfg.out_dir
              << "\n";
    return 0;
}

struct ArmResult {
    std::string arm;
    double mae = 0, rmse = 0, psnr = 0, ssim = 0;
    double bench_mae = 0, bench_vs_truth_mae = 0;
    int64_t night_frames = 0, bench_triplets = 0;
    fs::path flow_export_dir;  // first benchmark flow field lands here
};

ArmResult evaluate_session(TrainSession& session, const DatasetManifest& manifest,
                           const std::vector<Sample>& all, const SsimConfig& ssim_cfg,
                           const fs::path& flow_export_dir = {}) {
    ArmResult result;
    result.arm = to_string(session.train_cfg.ablate);
    result.flow_export_dir = flow_export_dir;
    double psnr_acc = 0.0;
    int64_t psnr_count = 0;
    for (const Sample& s : all) {
        if (!s.night) continue;
        const Grid truth = denormalize_visible(s.y, manifest.albedo_min, manifest.albedo_max);
        const Grid synth = synthesize(session, s);
        const MetricsReport r = evaluate(truth, synth, nullptr, manifest.albedo_max, ssim_cfg);
        result.mae += r.mae;
        result.rmse += r.rmse;
        result.ssim += r.ssim;
        if (std::isfinite(r.psnr)) {
            psnr_acc += r.psnr;
            ++psnr_count;
        }
        ++result.night_frames;
    }
    if (result.night_frames > 0) {
        result.mae /= static_cast<double>(result.night_frames);
        result.rmse /= static_cast<double>(result.night_frames);
        result.ssim /= static_cast<double>(result.night_frames);
        result.psnr = psnr_count ? psnr_acc / static_cast<double>(psnr_count)
                                 : std::numeric_limits<double>::infinity();
    }

    // Optical-flow benchmark: per day, extrapolate the first night frame from
    // the last two day frames and score within the bottom-right quadrant.
    const RegionSpec quadrant =
        bottom_right_quadrant(manifest.target_rows, manifest.target_cols);
    for (size_t i = 2; i < all.size(); ++i) {
        if (!(all[i].night && !all[i - 1].night && !all[i - 2].night)) continue;
        const Grid t0 = denormalize_visible(all[i - 2].y, manifest.albedo_min,
                                            manifest.albedo_max);
        const Grid t1 = denormalize_visible(all[i - 1].y, manifest.albedo_min,
                                            manifest.albedo_max);
        const Grid truth = denormalize_visible(all[i].y, manifest.albedo_min,
                                               manifest.albedo_max);
        const Grid synth = synthesize(session, all[i]);
        const FlowField flow = estimate_flow(t0, t1);
        if (result.bench_triplets == 0 && !result.flow_export_dir.empty()) {
            export_flow_field(flow, result.flow_export_dir,
                              "benchmark_" + all[i].timestamp);
        }
        const Grid bench = extrapolate(t1, flow, 1);
        result.bench_mae += mae(crop_grid(bench, quadrant), crop_grid(synth, quadrant));
        result.bench_vs_truth_mae += mae(crop_grid(bench, quadrant), crop_grid(truth, quadrant));
        ++result.bench_triplets;
    }
    if (result.bench_triplets > 0) {
        result.bench_mae /= static_cast<double>(result.bench_triplets);
        result.bench_vs_truth_mae /= static_cast<double>(result.bench_triplets);
    }
    return result;
}

int cmd_evaluate(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    if (args.checkpoints.empty()) throw ConfigError("evaluate needs at least one --checkpoint");
    if (cfg.manifest.empty()) throw ConfigError("evaluate needs a dataset manifest (--manifest)");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const std::vector<Sample> all = load_all_samples(manifest);
    fs::create_directories(cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);

    nlohmann::json out_json;
    out_json["conventions"] = metrics_conventions(cfg.ssim);
    std::ostringstream table;
    table << "night-frame evaluation (albedo MAE/RMSE; PSNR/SSIM on rendered images)\n";
    table << "arm            mae      rmse     psnr     ssim   bench_mae  bench_vs_truth\n";
    AttentionReport attention;
    bool have_attention = false;
    for (const auto& ck : args.checkpoints) {
        TrainSession session = load_checkpoint(ck);
        check_compatible(session, manifest);
        const ArmResult r = evaluate_session(session, manifest, all, cfg.ssim, cfg.out_dir);
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.2f %8.4f  %8.4f  %8.4f\n",
                      r.arm.c_str(), r.mae, r.rmse, r.psnr, r.ssim, r.bench_mae,
                      r.bench_vs_truth_mae);
        table << line;
        out_json["arms"].push_back({{"arm", r.arm},
                                    {"mae", r.mae},
                                    {"rmse", r.rmse},
                                    {"psnr", std::isfinite(r.psnr) ? nlohmann::json(r.psnr)
                                                                   : nlohmann::json("inf")},
                                    {"ssim", r.ssim},
                                    {"benchmark_mae", r.bench_mae},
                                    {"benchmark_vs_truth_mae", r.bench_vs_truth_mae},
                                    {"night_frames", r.night_frames}});
        if (!have_attention) {
            attention = attention_weights(session.g, channel_labels(session.channels));
            have_attention = true;
        }
    }
    table << "\n" << metrics_conventions(cfg.ssim) << "\n";
    std::cout << table.str();
    if (have_attention) {
        out_json["attention"] = nlohmann::json::parse(attention.to_json());
        std::ofstream(fs::path(cfg.out_dir) / "attention_report.txt") << attention.to_text();
    }
    std::ofstream(fs::path(cfg.out_dir) / "evaluation.json") << out_json.dump(2) << "\n";
    std::ofstream(fs::path(cfg.out_dir) / "evaluation.txt") << table.str();
    return 0;
}

int cmd_attention_report(const CliArgs& args) {
    RunConfig cfg = resolve_config(args);
    if (args.checkpoints.empty()) throw ConfigError("attention-report needs --checkpoint");
    if (cfg.manifest.empty()) {
        throw ConfigError("attention-report needs a dataset manifest (--manifest)");
    }
    TrainSession session = load_checkpoint(args.checkpoints.front());
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    check_compatible(session, manifest);
    if (args.sample_index < 0 ||
        args.sample_index >= static_cast<int64_t>(manifest.samples.size())) {
        throw DataError("sample index out of range");
    }
    const Sample sample = load_sample(manifest, args.sample_index);
    synthesize(session, sample);  // populates the SE weights
    const AttentionReport report =
        attention_weights(session.g, channel_labels(session.channels));
    fs::create_directories(cfg.out_dir);
    std::ofstream(fs::path(cfg.out_dir) / "attention_report.json") << report.to_json() << "\n";
    std::ofstream(fs::path(cfg.out_dir) / "attention_report.txt") << report.to_text();
    std::cout << report.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-GAN synthesis of night-time visible satellite imagery"};
    app.require_subcommand(1);
    CliArgs args;

    auto add_common = [&args](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "run configuration file (JSON)");
        cmd->add_option("--seed", args.seed, "RNG seed override");
        cmd->add_option("--out", args.out_dir, "output directory");
    };
    CLI::App* make_cmd = app.add_subcommand("make-synthetic", "generate a synthetic dataset");
    add_common(make_cmd);

    CLI::App* train_cmd = app.add_subcommand("train", "train the generator/discriminator pair");
    add_common(train_cmd);
    train_cmd->add_option("--manifest", args.manifest, "dataset manifest path");
    train_cmd->add_option("--epochs", args.epochs, "number of training epochs");
    train_cmd->add_option("--batch", args.batch, "mini-batch size");
    train_cmd->add_option("--ablate", args.ablate, "input arm: combined|ir_only|nwp_only");
    train_cmd->add_option("--checkpoint", args.checkpoints, "resume from this checkpoint");

    CLI::App* infer_cmd = app.add_subcommand("infer", "synthesize visible imagery");
    add_common(infer_cmd);
    infer_cmd->add_option("--manifest", args.manifest, "dataset manifest path");
    infer_cmd->add_option("--checkpoint", args.checkpoints, "trained checkpoint")->required();
    infer_cmd->add_option("--range", args.range, "sample range start:end");

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "night-frame metric table");
    add_common(eval_cmd);
    eval_cmd->add_option("--manifest", args.manifest, "dataset manifest path");
    eval_cmd->add_option("--checkpoint", args.checkpoints,
                         "trained checkpoint (repeat for multiple arms)");

    CLI::App* att_cmd = app.add_subcommand("attention-report", "channel attention weights");
    add_common(att_cmd);
    att_cmd->add_option("--manifest", args.manifest, "dataset manifest path");
    att_cmd->add_option("--checkpoint", args.checkpoints, "trained checkpoint")->required();
    att_cmd->add_option("--sample", args.sample_index, "sample index for the forward pass");

    try {
        app.parse(argc, argv);
        if (make_cmd->parsed()) return cmd_make_synthetic(args);
        if (train_cmd->parsed()) return cmd_train(args);
        if (infer_cmd->parsed()) return cmd_infer(args);
        if (eval_cmd->parsed()) return cmd_evaluate(args);
        if (att_cmd->parsed()) return cmd_attention_report(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
