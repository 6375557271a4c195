#include "nvgan/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace nvgan {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key: " + where + key);
        }
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    RunConfig cfg;
    require_keys(j, "", {"data", "model", "loss", "optim", "train", "synth", "eval", "out"});
    if (j.contains("data")) {
        const json& d = j["data"];
        require_keys(d, "data.", {"manifest", "train_hours"});
        read_into(d, "manifest", cfg.manifest);
        if (d.contains("train_hours")) {
            cfg.train.train_hour_lo = d.at("train_hours").at(0).get<double>();
            cfg.train.train_hour_hi = d.at("train_hours").at(1).get<double>();
        }
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        require_keys(m, "model.",
                     {"depth", "encoder_filters", "kernel", "se_reduction", "se_single_layer",
                      "dropout_rate", "dropout_levels", "noise_channel", "disc_filters"});
        read_into(m, "depth", cfg.gen.depth);
        read_into(m, "encoder_filters", cfg.gen.encoder_filters);
        read_into(m, "kernel", cfg.gen.kernel);
        read_into(m, "se_reduction", cfg.gen.se_reduction);
        read_into(m, "se_single_layer", cfg.gen.se_single_layer);
        read_into(m, "dropout_rate", cfg.gen.dropout_rate);
        read_into(m, "dropout_levels", cfg.gen.dropout_levels);
        read_into(m, "noise_channel", cfg.gen.noise_channel);
        read_into(m, "disc_filters", cfg.disc_filters);
        if (m.contains("depth") && !m.contains("encoder_filters")) {
            throw ConfigError("model.depth without model.encoder_filters; list one width per level");
        }
    }
    if (j.contains("loss")) {
        const json& l = j["loss"];
        require_keys(l, "loss.", {"lambda1", "lambda2"});
        read_into(l, "lambda1", cfg.loss.lambda1);
        read_into(l, "lambda2", cfg.loss.lambda2);
    }
    if (j.contains("optim")) {
        const json& o = j["optim"];
        require_keys(o, "optim.", {"lr", "beta1", "beta2", "eps"});
        read_into(o, "lr", cfg.optim.lr);
        read_into(o, "beta1", cfg.optim.beta1);
        read_into(o, "beta2", cfg.optim.beta2);
        read_into(o, "eps", cfg.optim.eps);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        require_keys(t, "train.", {"epochs", "batch", "seed", "ablate", "checkpoint_every"});
        read_into(t, "epochs", cfg.train.epochs);
        read_into(t, "batch", cfg.train.batch);
        read_into(t, "seed", cfg.train.seed);
        if (t.contains("ablate")) {
            cfg.train.ablate = ablation_from_string(t.at("ablate").get<std::string>());
        }
        read_into(t, "checkpoint_every", cfg.train.checkpoint_every);
    }
    if (j.contains("synth")) {
        const json& s = j["synth"];
        require_keys(s, "synth.",
                     {"samples", "rows", "cols", "ir_channels", "nwp_multilevel_channels",
                      "nwp_singlelevel_channels", "noise_channels", "seed", "start_hour",
                      "hours_per_frame", "day_start", "day_end", "cloud_speed_cols",
                      "cloud_speed_rows"});
        read_into(s, "samples", cfg.synth.samples);
        read_into(s, "rows", cfg.synth.rows);
        read_into(s, "cols", cfg.synth.cols);
        read_into(s, "ir_channels", cfg.synth.ir_channels);
        read_into(s, "nwp_multilevel_channels", cfg.synth.nwp_multilevel_channels);
        read_into(s, "nwp_singlelevel_channels", cfg.synth.nwp_singlelevel_channels);
        read_into(s, "noise_channels", cfg.synth.noise_channels);
        read_into(s, "seed", cfg.synth.seed);
        read_into(s, "start_hour", cfg.synth.start_hour);
        read_into(s, "hours_per_frame", cfg.synth.hours_per_frame);
        read_into(s, "day_start", cfg.synth.day_start);
        read_into(s, "day_end", cfg.synth.day_end);
        read_into(s, "cloud_speed_cols", cfg.synth.cloud_speed_cols);
        read_into(s, "cloud_speed_rows", cfg.synth.cloud_speed_rows);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        require_keys(e, "eval.", {"ssim_window", "ssim_stride"});
        read_into(e, "ssim_window", cfg.ssim.window);
        read_into(e, "ssim_stride", cfg.ssim.stride);
    }
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["data"] = {{"manifest", cfg.manifest},
                 {"train_hours", {cfg.train.train_hour_lo, cfg.train.train_hour_hi}}};
    j["model"] = {{"depth", cfg.gen.depth},
                  {"encoder_filters", cfg.gen.encoder_filters},
                  {"kernel", cfg.gen.kernel},
                  {"se_reduction", cfg.gen.se_reduction},
                  {"se_single_layer", cfg.gen.se_single_layer},
                  {"dropout_rate", cfg.gen.dropout_rate},
                  {"dropout_levels", cfg.gen.dropout_levels},
                  {"noise_channel", cfg.gen.noise_channel},
                  {"disc_filters", cfg.disc_filters}};
    j["loss"] = {{"lambda1", cfg.loss.lambda1}, {"lambda2", cfg.loss.lambda2}};
    j["optim"] = {{"lr", cfg.optim.lr},
                  {"beta1", cfg.optim.beta1},
                  {"beta2", cfg.optim.beta2},
                  {"eps", cfg.optim.eps}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch", cfg.train.batch},
                  {"seed", cfg.train.seed},
                  {"ablate", to_string(cfg.train.ablate)},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
    j["synth"] = {{"samples", cfg.synth.samples},
                  {"rows", cfg.synth.rows},
                  {"cols", cfg.synth.cols},
                  {"ir_channels", cfg.synth.ir_channels},
                  {"nwp_multilevel_channels", cfg.synth.nwp_multilevel_channels},
                  {"nwp_singlelevel_channels", cfg.synth.nwp_singlelevel_channels},
                  {"noise_channels", cfg.synth.noise_channels},
                  {"seed", cfg.synth.seed},
                  {"start_hour", cfg.synth.start_hour},
                  {"hours_per_frame", cfg.synth.hours_per_frame},
                  {"day_start", cfg.synth.day_start},
                  {"day_end", cfg.synth.day_end},
                  {"cloud_speed_cols", cfg.synth.cloud_speed_cols},
                  {"cloud_speed_rows", cfg.synth.cloud_speed_rows}};
    j["eval"] = {{"ssim_window", cfg.ssim.window}, {"ssim_stride", cfg.ssim.stride}};
    j["out"] = cfg.out_dir;
    return j.dump(2);
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir.string());
    std::ofstream out(out_dir / "config.json");
    if (!out) throw ConfigError("cannot write resolved config in " + out_dir.string());
    out << run_config_to_json(cfg) << "\n";
}

}  // namespace nvgan
