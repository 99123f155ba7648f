#include "sad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sad/error.hpp"

namespace sad {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'A', 'D', 'T', 'N', 'S', 'R', '1'};

template <typename U>
void put(std::ostream& out, U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
    unsigned char b[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) {
        throw Error(Errc::io, "truncated checkpoint");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(b[i]) << (8 * i);
    }
    return v;
}

template <typename T>
void put_value(std::ostream& out, T v) {
    if constexpr (sizeof(T) == 4) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put(out, bits);
    } else {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put(out, bits);
    }
}

json config_json(const model::ModelConfig& c) {
    return json{{"n_layers", c.n_layers},       {"n_heads", c.n_heads},         {"d_embed", c.d_embed},
                {"max_context", c.max_context}, {"state_dim", c.state_dim},     {"num_actions", c.num_actions},
                {"state_scale", c.state_scale}};
}

model::ModelConfig config_from(const json& j) {
    model::ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_embed = j.at("d_embed").get<int>();
    c.max_context = j.at("max_context").get<int>();
    c.state_dim = j.at("state_dim").get<int>();
    c.num_actions = j.at("num_actions").get<int>();
    c.state_scale = j.at("state_scale").get<std::vector<double>>();
    return c;
}

}  // namespace

template <typename T>
void save_checkpoint(const model::ModelParams<T>& params, const std::filesystem::path& dir,
                     const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "model.bin", std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + (dir / "model.bin").string());
    }
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& nt : params.tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
        out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.rank()));
        for (std::size_t d : nt.tensor.shape()) {
            put<std::uint64_t>(out, d);
        }
        put<std::uint32_t>(out, sizeof(T));
        for (T v : nt.tensor.values()) {
            put_value(out, v);
        }
    }
    json m = {{"model_config", config_json(params.config)},
              {"element_width", sizeof(T)},
              {"num_tensors", params.tensors.size()},
              {"config_hash", meta.config_hash},
              {"family", meta.family},
              {"method", meta.method},
              {"epochs", meta.epochs},
              {"final_loss", meta.final_loss},
              {"params_checksum", meta.params_checksum}};
    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) {
        throw Error(Errc::io, "cannot write " + (dir / "manifest.json").string());
    }
    mf << m.dump(2) << '\n';
}

template <typename T>
model::ModelParams<T> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta) {
    std::ifstream mf(dir / "manifest.json", std::ios::binary);
    std::ifstream in(dir / "model.bin", std::ios::binary);
    if (!mf || !in) {
        throw Error(Errc::missing_artifact, "no checkpoint in " + dir.string());
    }
    model::ModelParams<T> p;
    try {
        const json m = json::parse(mf);
        p.config = config_from(m.at("model_config"));
        if (meta != nullptr) {
            meta->config_hash = m.value("config_hash", "");
            meta->family = m.value("family", "");
            meta->method = m.value("method", "");
            meta->epochs = m.value("epochs", 0);
            meta->final_loss = m.value("final_loss", 0.0);
            meta->params_checksum = m.value("params_checksum", "");
        }
    } catch (const json::exception& e) {
        throw Error(Errc::io, std::string("malformed manifest: ") + e.what());
    }
    p.config.validate();
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw Error(Errc::io, "bad checkpoint magic");
    }
    const auto count = get<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = get<std::uint32_t>(in);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) {
            throw Error(Errc::io, "truncated checkpoint");
        }
        const auto rank = get<std::uint32_t>(in);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get<std::uint64_t>(in));
        }
        const auto width = get<std::uint32_t>(in);
        ad::Tensor<T> t(shape);
        for (T& v : t.values()) {
            if (width == 4) {
                const auto bits = get<std::uint32_t>(in);
                float f;
                std::memcpy(&f, &bits, 4);
                v = static_cast<T>(f);
            } else if (width == 8) {
                const auto bits = get<std::uint64_t>(in);
                double d;
                std::memcpy(&d, &bits, 8);
                v = static_cast<T>(d);
            } else {
                throw Error(Errc::io, "unsupported element width " + std::to_string(width));
            }
        }
        p.tensors.push_back({std::move(name), std::move(t)});
    }
    // shapes must agree with a fresh table for the same config
    const model::ModelParams<T> ref = model::zeros_like(model::init_params<T>(p.config, 0));
    if (ref.tensors.size() != p.tensors.size()) {
        throw Error(Errc::shape_mismatch, "checkpoint tensor count does not match its config");
    }
    for (std::size_t i = 0; i < ref.tensors.size(); ++i) {
        if (ref.tensors[i].name != p.tensors[i].name || ref.tensors[i].tensor.shape() != p.tensors[i].tensor.shape()) {
            throw Error(Errc::shape_mismatch, "checkpoint tensor " + p.tensors[i].name + " does not match its config");
        }
    }
    return p;
}

template void save_checkpoint<float>(const model::ModelParams<float>&, const std::filesystem::path&,
                                     const CheckpointMeta&);
template void save_checkpoint<double>(const model::ModelParams<double>&, const std::filesystem::path&,
                                      const CheckpointMeta&);
template model::ModelParams<float> load_checkpoint<float>(const std::filesystem::path&, CheckpointMeta*);
template model::ModelParams<double> load_checkpoint<double>(const std::filesystem::path&, CheckpointMeta*);

}  // namespace sad
