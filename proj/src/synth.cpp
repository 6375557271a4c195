#include "nvgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace nvgan {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// A periodic value-noise lattice advected at constant velocity and slowly
// morphing between two realizations.
struct Octave {
    int64_t lattice = 8;
    double amplitude = 1.0;
    double vx = 0.0, vy = 0.0;  // pixels per frame at target resolution
    double omega = 0.05, phase0 = 0.0;
    std::vector<float> a, b;

    static Octave make(int64_t lattice, double amplitude, double vx, double vy, Pcg32& rng) {
        Octave o;
        o.lattice = lattice;
        o.amplitude = amplitude;
        o.vx = vx;
        o.vy = vy;
        o.omega = 0.03 + 0.04 * rng.uniform();
        o.phase0 = kTau * rng.uniform();
        o.a.resize(static_cast<size_t>(lattice * lattice));
        o.b.resize(static_cast<size_t>(lattice * lattice));
        for (float& v : o.a) v = rng.normal();
        for (float& v : o.b) v = rng.normal();
        return o;
    }

    double sample_lattice(const std::vector<float>& l, double u, double v) const {
        u = std::fmod(u, static_cast<double>(lattice));
        v = std::fmod(v, static_cast<double>(lattice));
        if (u < 0) u += static_cast<double>(lattice);
        if (v < 0) v += static_cast<double>(lattice);
        const int64_t u0 = static_cast<int64_t>(u) % lattice;
        const int64_t v0 = static_cast<int64_t>(v) % lattice;
        const int64_t u1 = (u0 + 1) % lattice;
        const int64_t v1 = (v0 + 1) % lattice;
        const double tu = u - std::floor(u);
        const double tv = v - std::floor(v);
        const double x00 = l[static_cast<size_t>(u0 * lattice + v0)];
        const double x01 = l[static_cast<size_t>(u0 * lattice + v1)];
        const double x10 = l[static_cast<size_t>(u1 * lattice + v0)];
        const double x11 = l[static_cast<size_t>(u1 * lattice + v1)];
        const double top = x00 + tv * (x01 - x00);
        const double bot = x10 + tv * (x11 - x10);
        return top + tu * (bot - top);
    }

    double value(double row, double col, double t, int64_t rows, int64_t cols) const {
        const double pr = row - vy * t;
        const double pc = col - vx * t;
        const double u = pr / static_cast<double>(rows) * static_cast<double>(lattice);
        const double v = pc / static_cast<double>(cols) * static_cast<double>(lattice);
        const double blend = 0.5 + 0.5 * std::sin(omega * t + phase0);
        return amplitude *
               ((1.0 - blend) * sample_lattice(a, u, v) + blend * sample_lattice(b, u, v));
    }
};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Grid field_from_octaves(const std::vector<Octave>& octaves, double t, int64_t rows, int64_t cols,
                        double squash_gain) {
    Grid g({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            double z = 0.0;
            for (const Octave& o : octaves) {
                z += o.value(static_cast<double>(r), static_cast<double>(c), t, rows, cols);
            }
            g[r * cols + c] = static_cast<float>(logistic(squash_gain * z));
        }
    }
    return g;
}

Grid box_downsample(const Grid& full, int64_t out_rows, int64_t out_cols) {
    const int64_t rows = full.shape[0], cols = full.shape[1];
    const int64_t fr = rows / out_rows, fc = cols / out_cols;
    Grid out({out_rows, out_cols});
    for (int64_t r = 0; r < out_rows; ++r) {
        for (int64_t c = 0; c < out_cols; ++c) {
            double acc = 0.0;
            for (int64_t i = 0; i < fr; ++i) {
                for (int64_t j = 0; j < fc; ++j) {
                    acc += full[(r * fr + i) * cols + c * fc + j];
                }
            }
            out[r * out_cols + c] = static_cast<float>(acc / static_cast<double>(fr * fc));
        }
    }
    return out;
}

void clamp_into(Grid& g, float lo, float hi) {
    for (float& v : g.data) v = std::clamp(v, lo, hi);
}

struct MlKind {
    const char* kind;
    bool causal;
};

constexpr MlKind kMlKinds[] = {
    {"cloud_cover", true}, {"humidity", true},    {"u_wind", false},
    {"v_wind", false},     {"temperature", false}, {"vorticity", false},
};
constexpr const char* kMlLevels[] = {"850", "500", "300", "700", "200", "900"};

constexpr const char* kSlKinds[] = {
    "skin_temperature",
    "total_column_cloud_liquid_water",
    "total_column_cloud_ice_water",
    "surface_pressure",
};

}  // namespace

SynthScene synth_scene(const SynthConfig& cfg) {
    if (cfg.samples < 1) throw ConfigError("synth_scene: need at least one sample");
    const int64_t total_channels = cfg.ir_channels + cfg.nwp_multilevel_channels +
                                   cfg.nwp_singlelevel_channels + cfg.noise_channels;
    if (total_channels < 1) throw ConfigError("synth_scene: zero channels requested");
    if (cfg.rows < 8 || cfg.cols < 8 || cfg.rows % 4 != 0 || cfg.cols % 4 != 0) {
        throw ConfigError("synth_scene: grid extents must be multiples of 4 and >= 8");
    }

    SynthScene scene;
    scene.cfg = cfg;
    const int64_t rows = cfg.rows, cols = cfg.cols;
    const int64_t half_r = rows / 2, half_c = cols / 2;
    const int64_t quarter_r = rows / 4, quarter_c = cols / 4;

    // Channel table. Physical ranges are analytic bounds; generated values are
    // clamped into them so normalization stays inside [-1, 1].
    for (int64_t k = 0; k < cfg.ir_channels; ++k) {
        ChannelSpec spec;
        char buf[16];
        if (k < 8) {
            std::snprintf(buf, sizeof(buf), "CH%02d", static_cast<int>(7 + k));
        } else {
            std::snprintf(buf, sizeof(buf), "ir%02d", static_cast<int>(k));
        }
        spec.name = buf;
        spec.category = ChannelCategory::infrared;
        spec.native_rows = rows;
        spec.native_cols = cols;
        const double a = 292.0 + 1.5 * static_cast<double>(k);
        const double b = 45.0 + 3.0 * static_cast<double>(k);
        spec.physical_min = static_cast<float>(a - b - 4.0);
        spec.physical_max = static_cast<float>(a + 4.0);
        scene.channels.push_back(spec);
    }
    for (int64_t k = 0; k < cfg.nwp_multilevel_channels; ++k) {
        ChannelSpec spec;
        const MlKind& kind = kMlKinds[k % 6];
        spec.name = std::string(kind.kind) + "_" + kMlLevels[(k / 6) % 6];
        spec.category = ChannelCategory::nwp_multilevel;
        spec.native_rows = half_r;
        spec.native_cols = half_c;
        if (std::string(kind.kind) == "cloud_cover") {
            spec.physical_min = 0.0f;
            spec.physical_max = 1.0f;
        } else if (std::string(kind.kind) == "humidity") {
            spec.physical_min = 0.0f;
            spec.physical_max = 100.0f;
        } else if (std::string(kind.kind) == "temperature") {
            spec.physical_min = 258.0f;
            spec.physical_max = 288.0f;
        } else if (std::string(kind.kind) == "vorticity") {
            spec.physical_min = -5e-4f;
            spec.physical_max = 5e-4f;
        } else {
            spec.physical_min = -12.0f;  // winds
            spec.physical_max = 12.0f;
        }
        scene.channels.push_back(spec);
    }
    for (int64_t k = 0; k < cfg.nwp_singlelevel_channels; ++k) {
        ChannelSpec spec;
        spec.name = kSlKinds[k % 4];
        if (k >= 4) spec.name += "_" + std::to_string(k);
        spec.category = ChannelCategory::nwp_singlelevel;
        spec.native_rows = quarter_r;
        spec.native_cols = quarter_c;
        if (spec.name.starts_with("skin_temperature")) {
            spec.physical_min = 270.0f;
            spec.physical_max = 305.0f;
        } else if (spec.name.starts_with("total_column_cloud_liquid")) {
            spec.physical_min = 0.0f;
            spec.physical_max = 2.5f;
        } else if (spec.name.starts_with("total_column_cloud_ice")) {
            spec.physical_min = 0.0f;
            spec.physical_max = 1.5f;
        } else {
            spec.physical_min = 985.0f;
            spec.physical_max = 1025.0f;
        }
        scene.channels.push_back(spec);
    }
    for (int64_t k = 0; k < cfg.noise_channels; ++k) {
        ChannelSpec spec;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "noise%02d", static_cast<int>(k));
        spec.name = buf;
        spec.category = ChannelCategory::nwp_singlelevel;
        spec.native_rows = rows;
        spec.native_cols = cols;
        spec.physical_min = -5.0f;
        spec.physical_max = 5.0f;
        scene.channels.push_back(spec);
    }

    Pcg32 rng(cfg.seed, 0x5e0a11ce);
    const double vx = cfg.cloud_speed_cols, vy = cfg.cloud_speed_rows;
    std::vector<Octave> cloud_oct = {
        Octave::make(6, 1.0, vx, vy, rng),
        Octave::make(12, 0.55, vx, vy, rng),
        Octave::make(24, 0.30, vx, vy, rng),
        Octave::make(std::min<int64_t>(48, rows - 4), 0.18, vx, vy, rng),
    };
    std::vector<Octave> moist_oct = {Octave::make(5, 1.0, -0.8, 0.5, rng)};
    std::vector<Octave> temp_oct = {Octave::make(5, 1.0, 0.3, -0.4, rng)};
    std::vector<Octave> pres_oct = {Octave::make(4, 1.0, -0.2, -0.2, rng)};
    std::vector<Octave> vort_oct = {Octave::make(10, 1.0, 0.6, 0.1, rng)};

    Pcg32 frame_noise(cfg.seed, 0x0bfu);

    for (int64_t f = 0; f < cfg.samples; ++f) {
        const double t = static_cast<double>(f);
        const double hour =
            std::fmod(cfg.start_hour + t * cfg.hours_per_frame, 24.0);
        SynthFrame frame;
        frame.hour = hour;
        frame.night = hour < cfg.day_start || hour > cfg.day_end;
        char ts[24];
        std::snprintf(ts, sizeof(ts), "d%02dh%02d",
                      static_cast<int>((cfg.start_hour + t * cfg.hours_per_frame) / 24.0),
                      static_cast<int>(hour));
        frame.timestamp = ts;

        const Grid cloud = field_from_octaves(cloud_oct, t, rows, cols, 1.4);
        const Grid moist = field_from_octaves(moist_oct, t, rows, cols, 1.3);
        const Grid tfield = field_from_octaves(temp_oct, t, rows, cols, 1.0);
        const Grid pfield = field_from_octaves(pres_oct, t, rows, cols, 1.0);
        const Grid vfield = field_from_octaves(vort_oct, t, rows, cols, 1.0);
        frame.cloud = cloud;

        // Visible albedo, retained for night frames as the scoring target.
        frame.visible = Grid({3, rows, cols});
        const int64_t plane = rows * cols;
        for (int64_t i = 0; i < plane; ++i) {
            const double c = cloud[i], m = moist[i];
            const double blue = 0.11 + 0.62 * c + 0.24 * m;
            const double green = 0.08 + 0.70 * std::pow(c, 1.15) + 0.22 * m;
            const double red = 0.06 + 0.74 * std::pow(c, 1.3) + 0.20 * m;
            frame.visible[i] = static_cast<float>(1.65 * std::clamp(blue, 0.0, 1.0));
            frame.visible[plane + i] = static_cast<float>(1.65 * std::clamp(green, 0.0, 1.0));
            frame.visible[2 * plane + i] = static_cast<float>(1.65 * std::clamp(red, 0.0, 1.0));
        }

        const double diurnal = std::sin(kTau * (hour - 9.0) / 24.0);
        size_t ch = 0;
        for (int64_t k = 0; k < cfg.ir_channels; ++k, ++ch) {
            const ChannelSpec& spec = scene.channels[ch];
            const double a = 292.0 + 1.5 * static_cast<double>(k);
            const double b = 45.0 + 3.0 * static_cast<double>(k);
            const double s = 0.4 + 0.05 * static_cast<double>(k);
            Grid g({rows, cols});
            for (int64_t i = 0; i < plane; ++i) {
                g[i] = static_cast<float>(a - b * cloud[i] + s * frame_noise.normal());
            }
            clamp_into(g, spec.physical_min, spec.physical_max);
            frame.channels.push_back(std::move(g));
        }
        for (int64_t k = 0; k < cfg.nwp_multilevel_channels; ++k, ++ch) {
            const ChannelSpec& spec = scene.channels[ch];
            const std::string kind = kMlKinds[k % 6].kind;
            Grid g({half_r, half_c});
            if (kind == "cloud_cover") {
                const Grid base =
                    (k / 6 == 0) ? box_downsample(cloud, half_r, half_c) : Grid({half_r, half_c});
                if (k / 6 == 0) {
                    for (int64_t i = 0; i < g.size(); ++i) {
                        g[i] = base[i] + 0.02f * frame_noise.normal();
                    }
                } else {
                    Grid deep({rows, cols});
                    for (int64_t i = 0; i < plane; ++i) {
                        deep[i] = static_cast<float>(std::pow(cloud[i], 1.5));
                    }
                    Grid down = box_downsample(deep, half_r, half_c);
                    for (int64_t i = 0; i < g.size(); ++i) {
                        g[i] = down[i] + 0.02f * frame_noise.normal();
                    }
                }
            } else if (kind == "humidity") {
                Grid down = box_downsample(moist, half_r, half_c);
                const double offset = (k / 6 == 0) ? 15.0 : 10.0;
                const double gain = (k / 6 == 0) ? 70.0 : 75.0;
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(offset + gain * down[i] +
                                              0.5 * frame_noise.normal());
                }
            } else if (kind == "u_wind") {
                Grid down = box_downsample(tfield, half_r, half_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(vx + 1.5 * (down[i] - 0.5) +
                                              0.1 * frame_noise.normal());
                }
            } else if (kind == "v_wind") {
                Grid down = box_downsample(pfield, half_r, half_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(vy + 1.5 * (down[i] - 0.5) +
                                              0.1 * frame_noise.normal());
                }
            } else if (kind == "temperature") {
                Grid down = box_downsample(tfield, half_r, half_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(272.0 + 6.0 * diurnal + 4.0 * (down[i] - 0.5) +
                                              0.1 * frame_noise.normal());
                }
            } else {  // vorticity: nuisance field
                Grid down = box_downsample(vfield, half_r, half_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(4e-4 * (down[i] - 0.5) +
                                              1e-5 * frame_noise.normal());
                }
            }
            clamp_into(g, spec.physical_min, spec.physical_max);
            frame.channels.push_back(std::move(g));
        }
        for (int64_t k = 0; k < cfg.nwp_singlelevel_channels; ++k, ++ch) {
            const ChannelSpec& spec = scene.channels[ch];
            const std::string kind = kSlKinds[k % 4];
            Grid g({quarter_r, quarter_c});
            if (kind == "skin_temperature") {
                Grid down = box_downsample(tfield, quarter_r, quarter_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(287.0 + 9.0 * diurnal + 3.0 * (down[i] - 0.5) +
                                              0.1 * frame_noise.normal());
                }
            } else if (kind == "total_column_cloud_liquid_water") {
                Grid prod({rows, cols});
                for (int64_t i = 0; i < plane; ++i) prod[i] = cloud[i] * moist[i];
                Grid down = box_downsample(prod, quarter_r, quarter_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(2.2 * down[i] + 0.01 * frame_noise.normal());
                }
            } else if (kind == "total_column_cloud_ice_water") {
                Grid prod({rows, cols});
                for (int64_t i = 0; i < plane; ++i) prod[i] = cloud[i] * (1.0f - moist[i]);
                Grid down = box_downsample(prod, quarter_r, quarter_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(1.1 * down[i] + 0.01 * frame_noise.normal());
                }
            } else {  // surface_pressure: nuisance field
                Grid down = box_downsample(pfield, quarter_r, quarter_c);
                for (int64_t i = 0; i < g.size(); ++i) {
                    g[i] = static_cast<float>(1002.0 + 12.0 * (down[i] - 0.5) +
                                              0.05 * frame_noise.normal());
                }
            }
            clamp_into(g, spec.physical_min, spec.physical_max);
            frame.channels.push_back(std::move(g));
        }
        for (int64_t k = 0; k < cfg.noise_channels; ++k, ++ch) {
            const ChannelSpec& spec = scene.channels[ch];
            Grid g({rows, cols});
            for (float& v : g.data) v = frame_noise.normal();
            clamp_into(g, spec.physical_min, spec.physical_max);
            frame.channels.push_back(std::move(g));
        }
        scene.frames.push_back(std::move(frame));
    }
    return scene;
}

DatasetManifest scene_manifest(const SynthScene& scene) {
    DatasetManifest m;
    m.target_rows = scene.cfg.rows;
    m.target_cols = scene.cfg.cols;
    m.albedo_min = 0.0f;
    m.albedo_max = 1.65f;
    m.channels = scene.channels;
    for (const auto& frame : scene.frames) {
        SampleRecord rec;
        rec.timestamp = frame.timestamp;
        rec.hour = frame.hour;
        rec.night = frame.night;
        m.samples.push_back(std::move(rec));
    }
    return m;
}

std::vector<Sample> scene_to_samples(const SynthScene& scene) {
    const DatasetManifest m = scene_manifest(scene);
    std::vector<Sample> out;
    out.reserve(scene.frames.size());
    for (size_t i = 0; i < scene.frames.size(); ++i) {
        out.push_back(
            assemble_sample(m, scene.frames[i].channels, scene.frames[i].visible, m.samples[i]));
    }
    return out;
}

DatasetManifest write_synthetic_dataset(const SynthScene& scene,
                                        const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create dataset directory " + dir.string());
    DatasetManifest m = scene_manifest(scene);
    m.root = dir;
    for (size_t f = 0; f < scene.frames.size(); ++f) {
        const SynthFrame& frame = scene.frames[f];
        SampleRecord& rec = m.samples[f];
        char buf[64];
        for (size_t c = 0; c < frame.channels.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "f%04zu_c%02zu.raw", f, c);
            write_raw_grid(dir / buf, frame.channels[c]);
            rec.channel_files.push_back(buf);
        }
        std::snprintf(buf, sizeof(buf), "f%04zu_vis.raw", f);
        write_raw_grid(dir / buf, frame.visible);
        rec.visible_file = buf;
    }
    save_manifest(m, dir / "manifest.json");

    std::ofstream readme(dir / "README.md");
    readme << "# Synthetic visible-light scene\n\n"
           << "Procedurally generated desk-scale dataset: advected band-limited cloud and\n"
           << "moisture fields drive " << scene.cfg.ir_channels
           << " infrared-like channels (monotone decreasing in cloud cover),\n"
           << scene.cfg.nwp_multilevel_channels + scene.cfg.nwp_singlelevel_channels
           << " coarse NWP-like channels, and " << scene.cfg.noise_channels
           << " pure-noise channel(s).\n"
           << "Visible albedo (3 planes: blue, green, red) is a fixed nonlinear function of\n"
           << "cloud and moisture, scaled to [0, 1.65]. Frames outside hours ["
           << scene.cfg.day_start << ", " << scene.cfg.day_end
           << "] are flagged night; their visible truth is retained so nighttime synthesis\n"
           << "can be scored. Raw files are flat little-endian float32, row-major.\n\n"
           << "seed: " << scene.cfg.seed << ", samples: " << scene.cfg.samples << ", grid: "
           << scene.cfg.rows << "x" << scene.cfg.cols << "\n";
    return m;
}

}  // namespace nvgan
