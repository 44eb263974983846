#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddg/models.hpp"
#include "ddg/trainer.hpp"

namespace ddg {

inline std::string to_string(PairingMode m) {
    return m == PairingMode::shift ? "shift" : "all_pairs";
}
inline std::string to_string(ConstraintMode m) {
    return m == ConstraintMode::hinge ? "hinge" : "raw";
}
inline std::string to_string(TrainMode m) { return m == TrainMode::ddg ? "ddg" : "erm"; }

inline PairingMode pairing_from_string(const std::string& s) {
    if (s == "shift") return PairingMode::shift;
    if (s == "all_pairs") return PairingMode::all_pairs;
    throw ConfigError("unknown pairing mode: " + s);
}
inline ConstraintMode constraint_from_string(const std::string& s) {
    if (s == "hinge") return ConstraintMode::hinge;
    if (s == "raw") return ConstraintMode::raw;
    throw ConfigError("unknown constraint mode: " + s);
}
inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "ddg") return TrainMode::ddg;
    if (s == "erm") return TrainMode::erm;
    throw ConfigError("unknown train mode: " + s);
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"gamma", c.gamma},
            {"gamma_auto", c.gamma_auto},
            {"lambda0", c.lambda0},
            {"eta1", c.eta1},
            {"eta2", c.eta2},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"pairing", to_string(c.pairing)},
            {"constraint_mode", to_string(c.constraint_mode)},
            {"augment", c.augment},
            {"cycle", c.cycle},
            {"cycle_weight", c.cycle_weight},
            {"seed", c.seed},
            {"mode", to_string(c.mode)},
            {"early_stop", c.early_stop},
            {"patience", c.patience}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.gamma = j.at("gamma").get<double>();
    c.gamma_auto = j.at("gamma_auto").get<bool>();
    c.lambda0 = j.at("lambda0").get<double>();
    c.eta1 = j.at("eta1").get<double>();
    c.eta2 = j.at("eta2").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.pairing = pairing_from_string(j.at("pairing").get<std::string>());
    c.constraint_mode = constraint_from_string(j.at("constraint_mode").get<std::string>());
    c.augment = j.at("augment").get<bool>();
    c.cycle = j.at("cycle").get<bool>();
    c.cycle_weight = j.at("cycle_weight").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mode = train_mode_from_string(j.at("mode").get<std::string>());
    c.early_stop = j.at("early_stop").get<bool>();
    c.patience = j.at("patience").get<std::size_t>();
    return c;
}

inline nlohmann::json dims_to_json(const ModelDims& d) {
    return {{"image_h", d.image_h}, {"image_w", d.image_w}, {"classes", d.classes},
            {"s_dim", d.s_dim},     {"v_dim", d.v_dim},     {"hidden", d.hidden}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
    ModelDims d;
    d.image_h = j.at("image_h").get<std::size_t>();
    d.image_w = j.at("image_w").get<std::size_t>();
    d.classes = j.at("classes").get<std::size_t>();
    d.s_dim = j.at("s_dim").get<std::size_t>();
    d.v_dim = j.at("v_dim").get<std::size_t>();
    d.hidden = j.at("hidden").get<std::size_t>();
    return d;
}

struct Checkpoint {
    TrainConfig config;
    ModelDims dims;
    double lambda = 0.0;
    std::uint64_t step = 0;
    ModelBundle model;
};

namespace detail {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
    write_u32_le(out, static_cast<std::uint32_t>(v));
    write_u32_le(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64_le(std::istream& in, const char* what) {
    const std::uint64_t lo = read_u32_le(in, what);
    const std::uint64_t hi = read_u32_le(in, what);
    return lo | (hi << 32);
}

inline void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64_le(out, bits);
}

inline double read_f64_le(std::istream& in, const char* what) {
    const std::uint64_t bits = read_u64_le(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_tensor_entry(std::ostream& out, const std::string& name, const Tensor& t) {
    write_u32_le(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32_le(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u32_le(out, static_cast<std::uint32_t>(d));
    for (std::size_t k = 0; k < t.numel(); ++k) write_f64_le(out, t[k]);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write("DDGC", 4);
    detail::write_u32_le(out, 1);  // version

    nlohmann::json snapshot = {{"train", train_config_to_json(ckpt.config)},
                               {"dims", dims_to_json(ckpt.dims)}};
    const std::string cfg = snapshot.dump();
    detail::write_u32_le(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    detail::write_f64_le(out, ckpt.lambda);
    detail::write_u64_le(out, ckpt.step);

    ModelBundle& m = const_cast<ModelBundle&>(ckpt.model);
    auto params = m.all_params();
    detail::write_u32_le(out, static_cast<std::uint32_t>(params.size()));
    for (Param* p : params) detail::write_tensor_entry(out, p->name, p->value);
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "DDGC")
        throw FormatError("load_checkpoint: bad magic in " + path);
    const std::uint32_t version = detail::read_u32_le(in, "version");
    if (version != 1)
        throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));

    const std::uint32_t cfg_len = detail::read_u32_le(in, "config length");
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), cfg_len);
    if (!in) throw FormatError("load_checkpoint: truncated config in " + path);
    nlohmann::json snapshot;
    try {
        snapshot = nlohmann::json::parse(cfg);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_checkpoint: bad config JSON: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.config = train_config_from_json(snapshot.at("train"));
    ckpt.dims = dims_from_json(snapshot.at("dims"));
    ckpt.lambda = detail::read_f64_le(in, "lambda");
    ckpt.step = detail::read_u64_le(in, "step");
    ckpt.model = ModelBundle(ckpt.dims, /*seed=*/0);

    const std::uint32_t count = detail::read_u32_le(in, "tensor count");
    auto params = ckpt.model.all_params();
    if (count != params.size())
        throw ConsistencyError("load_checkpoint: expected " + std::to_string(params.size()) +
                               " tensors, found " + std::to_string(count));
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint32_t name_len = detail::read_u32_le(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw FormatError("load_checkpoint: truncated tensor name");
        const std::uint32_t rank = detail::read_u32_le(in, "rank");
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = detail::read_u32_le(in, "dim");
        Tensor t(shape);
        for (std::size_t k = 0; k < t.numel(); ++k) t[k] = detail::read_f64_le(in, "payload");
        Param* target = nullptr;
        for (Param* p : params)
            if (p->name == name) target = p;
        if (!target) throw ConsistencyError("load_checkpoint: unknown tensor " + name);
        if (!target->value.same_shape(t))
            throw ConsistencyError("load_checkpoint: shape mismatch for " + name);
        target->value = std::move(t);
        target->zero_grad();
    }
    return ckpt;
}

}  // namespace ddg
