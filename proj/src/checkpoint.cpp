#include "caae/checkpoint.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace caae {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'A', 'E', 'c', 'k', 'p', 't'};

uint32_t crc32_update(uint32_t crc, const void* data, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const uint8_t*>(data);
    crc = ~crc;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

struct CrcWriter {
    std::ostream& out;
    uint32_t crc = 0;
    void write(const void* data, size_t len) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        crc = crc32_update(crc, data, len);
    }
    template <typename T>
    void pod(const T& v) {
        write(&v, sizeof(T));
    }
    void str(const std::string& s) {
        pod(static_cast<uint64_t>(s.size()));
        write(s.data(), s.size());
    }
};

struct CrcReader {
    std::istream& in;
    uint32_t crc = 0;
    void read(void* data, size_t len) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
        if (!in) throw IoError("checkpoint truncated");
        crc = crc32_update(crc, data, len);
    }
    template <typename T>
    T pod() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
    std::string str() {
        const auto n = pod<uint64_t>();
        if (n > (1ULL << 32)) throw IoError("checkpoint corrupt: oversized string");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
};

json network_to_json(const NetworkConfig& n) {
    return json{{"image_size", n.image_size},       {"channels", n.channels},
                {"latent_dim", n.latent_dim},       {"base_filters", n.base_filters},
                {"num_scales", n.num_scales},       {"use_batchnorm_dimg", n.use_batchnorm_dimg}};
}

NetworkConfig network_from_json(const json& j) {
    NetworkConfig n;  // absent keys keep their defaults
    n.image_size = j.value("image_size", n.image_size);
    n.channels = j.value("channels", n.channels);
    n.latent_dim = j.value("latent_dim", n.latent_dim);
    n.base_filters = j.value("base_filters", n.base_filters);
    n.num_scales = j.value("num_scales", n.num_scales);
    n.use_batchnorm_dimg = j.value("use_batchnorm_dimg", n.use_batchnorm_dimg);
    return n;
}

json config_to_json(const TrainConfig& c) {
    json j = network_to_json(c.network);
    j["lambda"] = c.weights.lambda;
    j["gamma"] = c.weights.gamma;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["ablate_dz"] = c.ablate_dz;
    j["ablate_dimg"] = c.ablate_dimg;
    j["saturating_g"] = c.saturating_g;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.network = network_from_json(j);
    c.weights.lambda = j.value("lambda", c.weights.lambda);
    c.weights.gamma = j.value("gamma", c.weights.gamma);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.ablate_dz = j.value("ablate_dz", c.ablate_dz);
    c.ablate_dimg = j.value("ablate_dimg", c.ablate_dimg);
    c.saturating_g = j.value("saturating_g", c.saturating_g);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    return c;
}

void write_array(CrcWriter& w, const std::string& name, const Tensor& t) {
    w.str(name);
    w.pod(static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) w.pod(static_cast<int32_t>(t.dim(i)));
    w.pod(static_cast<uint64_t>(t.numel()));
    w.write(t.data(), static_cast<size_t>(t.numel()) * sizeof(Real));
}

void read_array_into(CrcReader& r, const std::string& expect_name, Tensor& t) {
    const std::string name = r.str();
    if (name != expect_name)
        throw ValidationError("checkpoint array order mismatch: expected " + expect_name +
                              ", found " + name);
    const auto ndim = r.pod<uint32_t>();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = r.pod<int32_t>();
    const auto n = r.pod<uint64_t>();
    if (shape != t.shape() || n != static_cast<uint64_t>(t.numel()))
        throw ValidationError("checkpoint array shape mismatch for " + expect_name);
    r.read(t.data(), static_cast<size_t>(n) * sizeof(Real));
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) {
    return config_to_json(config).dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("config is not a JSON object");
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
}

void save_checkpoint(TrainState& state, const TrainConfig& config, const std::string& path) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + path);
        CrcWriter w{out};
        w.write(kMagic, sizeof(kMagic));
        w.pod(kCheckpointVersion);

        json header = config_to_json(config);
        header["format_version"] = kCheckpointVersion;
        header["step"] = state.step();
        header["rng_state"] = state.rng().serialize();
        json adam_t = json::object();
        for (const auto& [g, grp] : state.adam()) adam_t[g] = grp.t;
        header["adam_t"] = adam_t;
        w.str(header.dump());

        Model& m = state.model();
        auto& adam = state.adam();
        uint64_t count = 0;
        for (const auto& g : Model::group_names())
            count += 3 * m.group_params(g).size();
        count += m.all_state().size();
        w.pod(count);
        for (const auto& g : Model::group_names()) {
            auto params = m.group_params(g);
            auto& grp = adam[g];
            for (size_t i = 0; i < params.size(); ++i) {
                write_array(w, "param:" + params[i].name, *params[i].value);
                write_array(w, "adam_m:" + params[i].name, grp.slots[i].m);
                write_array(w, "adam_v:" + params[i].name, grp.slots[i].v);
            }
        }
        for (const auto& s : m.all_state()) write_array(w, "state:" + s.name, *s.value);
        const uint32_t crc = w.crc;
        out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
        if (!out) throw IoError("cannot write checkpoint: " + path);
    }
    fs::rename(tmp, target);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    CrcReader r{in};
    char magic[8];
    r.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a CAAE checkpoint: " + path);
    const auto version = r.pod<uint32_t>();
    if (version != kCheckpointVersion)
        throw ValidationError("checkpoint format_version " + std::to_string(version) +
                              " unsupported (expected " + std::to_string(kCheckpointVersion) +
                              ")");
    json header = json::parse(r.str());
    LoadedCheckpoint result;
    result.config = config_from_json(header);

    result.state = std::make_unique<TrainState>(result.config.network, result.config.seed);
    TrainState& st = *result.state;
    st.step() = header.at("step").get<int64_t>();
    st.rng().restore(header.at("rng_state").get<std::string>());
    for (auto& [g, grp] : st.adam()) grp.t = header.at("adam_t").at(g).get<int64_t>();

    const auto count = r.pod<uint64_t>();
    Model& m = st.model();
    uint64_t seen = 0;
    for (const auto& g : Model::group_names()) {
        auto params = m.group_params(g);
        auto& grp = st.adam()[g];
        for (size_t i = 0; i < params.size(); ++i) {
            read_array_into(r, "param:" + params[i].name, *params[i].value);
            read_array_into(r, "adam_m:" + params[i].name, grp.slots[i].m);
            read_array_into(r, "adam_v:" + params[i].name, grp.slots[i].v);
            seen += 3;
        }
    }
    for (const auto& s : m.all_state()) {
        read_array_into(r, "state:" + s.name, *s.value);
        ++seen;
    }
    if (seen != count) throw ValidationError("checkpoint array count mismatch");
    const uint32_t computed = r.crc;
    uint32_t stored;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in) throw IoError("checkpoint truncated (missing checksum)");
    if (stored != computed) throw IoError("checkpoint corrupt: checksum mismatch");
    return result;
}

LoadedCheckpoint load_checkpoint_expecting(const std::string& path,
                                           const NetworkConfig& expected) {
    LoadedCheckpoint loaded = load_checkpoint(path);
    const NetworkConfig& a = loaded.config.network;
    auto mismatch = [&](const char* field) {
        throw ValidationError(std::string("checkpoint network config mismatch in field '") +
                              field + "'");
    };
    if (a.image_size != expected.image_size) mismatch("image_size");
    if (a.channels != expected.channels) mismatch("channels");
    if (a.latent_dim != expected.latent_dim) mismatch("latent_dim");
    if (a.base_filters != expected.base_filters) mismatch("base_filters");
    if (a.num_scales != expected.num_scales) mismatch("num_scales");
    if (a.use_batchnorm_dimg != expected.use_batchnorm_dimg) mismatch("use_batchnorm_dimg");
    return loaded;
}

}  // namespace caae
