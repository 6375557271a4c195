#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "nvgan/image.hpp"
#include "nvgan/trainer.hpp"

namespace nvgan {

namespace {

using nlohmann::json;

constexpr char kMagic[9] = "NVGANCK1";
constexpr uint32_t kVersion = 1;
constexpr size_t kPrefixBytes = 8 + 4 + 8 + 4;  // magic, version, header_len, crc

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::string& out, uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::string& out, uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), 8);
}

json shape_json(const Shape& s) { return json(s); }

json config_json(const TrainSession& s) {
    json j;
    j["gen"] = {{"depth", s.gen_cfg.depth},
                {"encoder_filters", s.gen_cfg.encoder_filters},
                {"kernel", s.gen_cfg.kernel},
                {"in_channels", s.gen_cfg.in_channels},
                {"out_channels", s.gen_cfg.out_channels},
                {"se_reduction", s.gen_cfg.se_reduction},
                {"se_single_layer", s.gen_cfg.se_single_layer},
                {"dropout_rate", s.gen_cfg.dropout_rate},
                {"dropout_levels", s.gen_cfg.dropout_levels},
                {"noise_channel", s.gen_cfg.noise_channel}};
    j["disc"] = {{"filters", s.disc_cfg.filters},
                 {"kernel", s.disc_cfg.kernel},
                 {"condition_channels", s.disc_cfg.condition_channels},
                 {"image_channels", s.disc_cfg.image_channels}};
    j["loss"] = {{"lambda1", s.loss_cfg.lambda1}, {"lambda2", s.loss_cfg.lambda2}};
    j["adam"] = {{"lr", s.adam_cfg.lr},
                 {"beta1", s.adam_cfg.beta1},
                 {"beta2", s.adam_cfg.beta2},
                 {"eps", s.adam_cfg.eps}};
    j["train"] = {{"epochs", s.train_cfg.epochs},
                  {"batch", s.train_cfg.batch},
                  {"seed", s.train_cfg.seed},
                  {"ablate", to_string(s.train_cfg.ablate)},
                  {"checkpoint_every", s.train_cfg.checkpoint_every},
                  {"train_hour_lo", s.train_cfg.train_hour_lo},
                  {"train_hour_hi", s.train_cfg.train_hour_hi}};
    j["albedo_range"] = {s.albedo_min, s.albedo_max};
    j["channels"] = json::array();
    for (const auto& spec : s.channels) {
        j["channels"].push_back({{"name", spec.name},
                                 {"category", to_string(spec.category)},
                                 {"native_grid", {spec.native_rows, spec.native_cols}},
                                 {"physical_range", {spec.physical_min, spec.physical_max}}});
    }
    return j;
}

TrainSession session_from_config(const json& j) {
    GeneratorConfig gen;
    gen.depth = j.at("gen").at("depth").get<int>();
    gen.encoder_filters = j.at("gen").at("encoder_filters").get<std::vector<int64_t>>();
    gen.kernel = j.at("gen").at("kernel").get<int>();
    gen.in_channels = j.at("gen").at("in_channels").get<int64_t>();
    gen.out_channels = j.at("gen").at("out_channels").get<int64_t>();
    gen.se_reduction = j.at("gen").at("se_reduction").get<int>();
    gen.se_single_layer = j.at("gen").at("se_single_layer").get<bool>();
    gen.dropout_rate = j.at("gen").at("dropout_rate").get<float>();
    gen.dropout_levels = j.at("gen").at("dropout_levels").get<int>();
    gen.noise_channel = j.at("gen").at("noise_channel").get<bool>();
    DiscriminatorConfig disc;
    disc.filters = j.at("disc").at("filters").get<std::vector<int64_t>>();
    disc.kernel = j.at("disc").at("kernel").get<int>();
    disc.condition_channels = j.at("disc").at("condition_channels").get<int64_t>();
    disc.image_channels = j.at("disc").at("image_channels").get<int64_t>();
    LossConfig loss;
    loss.lambda1 = j.at("loss").at("lambda1").get<float>();
    loss.lambda2 = j.at("loss").at("lambda2").get<float>();
    AdamConfig adam;
    adam.lr = j.at("adam").at("lr").get<float>();
    adam.beta1 = j.at("adam").at("beta1").get<float>();
    adam.beta2 = j.at("adam").at("beta2").get<float>();
    adam.eps = j.at("adam").at("eps").get<float>();
    TrainConfig train;
    train.epochs = j.at("train").at("epochs").get<int>();
    train.batch = j.at("train").at("batch").get<int>();
    train.seed = j.at("train").at("seed").get<uint64_t>();
    train.ablate = ablation_from_string(j.at("train").at("ablate").get<std::string>());
    train.checkpoint_every = j.at("train").at("checkpoint_every").get<int>();
    train.train_hour_lo = j.at("train").at("train_hour_lo").get<double>();
    train.train_hour_hi = j.at("train").at("train_hour_hi").get<double>();
    std::vector<ChannelSpec> channels;
    for (const auto& cj : j.at("channels")) {
        ChannelSpec spec;
        spec.name = cj.at("name").get<std::string>();
        spec.category = category_from_string(cj.at("category").get<std::string>());
        spec.native_rows = cj.at("native_grid").at(0).get<int64_t>();
        spec.native_cols = cj.at("native_grid").at(1).get<int64_t>();
        spec.physical_min = cj.at("physical_range").at(0).get<float>();
        spec.physical_max = cj.at("physical_range").at(1).get<float>();
        channels.push_back(std::move(spec));
    }
    const float albedo_min = j.at("albedo_range").at(0).get<float>();
    const float albedo_max = j.at("albedo_range").at(1).get<float>();
    return make_session(gen, disc, loss, adam, train, channels, albedo_min, albedo_max);
}

}  // namespace

void save_checkpoint(TrainSession& session, const std::filesystem::path& path) {
    const auto buffers = named_state(session);
    json header;
    header["config"] = config_json(session);
    header["counters"] = {{"epoch", session.epoch},
                          {"g_opt_t", session.g_opt.step_count()},
                          {"d_opt_t", session.d_opt.step_count()}};
    header["rng"] = session.rng.serialize();
    header["shapes"] = json::array();
    for (const auto& [name, grid] : buffers) {
        header["shapes"].push_back({{"name", name}, {"shape", shape_json(grid->shape)}});
    }
    const std::string header_bytes = header.dump();

    std::string body = header_bytes;
    for (const auto& [name, grid] : buffers) {
        body.append(reinterpret_cast<const char*>(grid->data.data()),
                    grid->data.size() * sizeof(float));
    }
    const uint32_t crc =
        crc32(reinterpret_cast<const uint8_t*>(body.data()), body.size());

    std::string out;
    out.reserve(kPrefixBytes + body.size());
    out.append(kMagic, 8);
    put_u32(out, kVersion);
    put_u64(out, static_cast<uint64_t>(header_bytes.size()));
    put_u32(out, crc);
    out += body;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<long>(out.size()));
    if (!f) throw CheckpointError("short write to " + path.string());
}

TrainSession load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    const auto total = static_cast<size_t>(f.tellg());
    if (total < kPrefixBytes) {
        throw CheckpointTruncatedError("checkpoint " + path.string() + " is too short");
    }
    f.seekg(0);
    std::string raw(total, '\0');
    f.read(raw.data(), static_cast<long>(total));
    if (!f) throw CheckpointTruncatedError("short read from " + path.string());

    if (std::memcmp(raw.data(), kMagic, 8) != 0) {
        throw CheckpointFormatError("bad magic bytes in " + path.string());
    }
    uint32_t version = 0;
    std::memcpy(&version, raw.data() + 8, 4);
    if (version != kVersion) {
        throw CheckpointVersionError("unsupported checkpoint version " +
                                     std::to_string(version));
    }
    uint64_t header_len = 0;
    std::memcpy(&header_len, raw.data() + 12, 8);
    uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, raw.data() + 20, 4);
    if (kPrefixBytes + header_len > total) {
        throw CheckpointTruncatedError("checkpoint header extends past end of file");
    }

    json header;
    try {
        header = json::parse(raw.begin() + static_cast<long>(kPrefixBytes),
                             raw.begin() + static_cast<long>(kPrefixBytes + header_len));
    } catch (const json::exception& e) {
        throw CheckpointFormatError(std::string("unparseable checkpoint header: ") + e.what());
    }

    // Size bookkeeping comes before the checksum verdict so that a short file
    // reports truncation rather than corruption.
    size_t declared_payload = 0;
    try {
        for (const auto& entry : header.at("shapes")) {
            const Shape shape = entry.at("shape").get<Shape>();
            declared_payload += static_cast<size_t>(shape_numel(shape)) * sizeof(float);
        }
    } catch (const json::exception& e) {
        throw CheckpointFormatError(std::string("bad shapes table: ") + e.what());
    }
    if (kPrefixBytes + header_len + declared_payload > total) {
        throw CheckpointTruncatedError("checkpoint payload ends early in " + path.string());
    }
    if (kPrefixBytes + header_len + declared_payload < total) {
        throw CheckpointFormatError("checkpoint has trailing bytes");
    }
    const uint32_t actual_crc = crc32(
        reinterpret_cast<const uint8_t*>(raw.data()) + kPrefixBytes, total - kPrefixBytes);
    if (actual_crc != stored_crc) {
        throw CheckpointChecksumError("checksum mismatch in " + path.string());
    }

    TrainSession session;
    try {
        session = session_from_config(header.at("config"));
        session.epoch = header.at("counters").at("epoch").get<int64_t>();
        session.g_opt.set_step_count(header.at("counters").at("g_opt_t").get<int64_t>());
        session.d_opt.set_step_count(header.at("counters").at("d_opt_t").get<int64_t>());
        session.rng = Pcg32::deserialize(header.at("rng").get<std::string>());
    } catch (const json::exception& e) {
        throw CheckpointFormatError(std::string("incomplete checkpoint header: ") + e.what());
    }

    const auto buffers = named_state(session);
    const json& shapes = header.at("shapes");
    if (shapes.size() != buffers.size()) {
        throw CheckpointFormatError("checkpoint lists " + std::to_string(shapes.size()) +
                                    " buffers, model has " + std::to_string(buffers.size()));
    }
    size_t offset = kPrefixBytes + header_len;
    for (size_t i = 0; i < buffers.size(); ++i) {
        const auto& [name, grid] = buffers[i];
        if (shapes[i].at("name").get<std::string>() != name ||
            shapes[i].at("shape").get<Shape>() != grid->shape) {
            throw CheckpointFormatError("buffer " + std::to_string(i) +
                                        " does not match the rebuilt model: " + name);
        }
        const size_t bytes = grid->data.size() * sizeof(float);
        if (offset + bytes > total) {
            throw CheckpointTruncatedError("checkpoint payload ends early at buffer " + name);
        }
        std::memcpy(grid->data.data(), raw.data() + offset, bytes);
        offset += bytes;
    }
    return session;
}

}  // namespace nvgan
