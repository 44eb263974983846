#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ddg/adam.hpp"
#include "ddg/autograd.hpp"
#include "ddg/errors.hpp"
#include "ddg/rng.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

enum class CodeKind { semantic, variation };

struct LatentCode {
    CodeKind kind;
    Tensor values;  // length s_dim or v_dim
};

struct ModelDims {
    std::size_t image_h = 16;
    std::size_t image_w = 16;
    std::size_t classes = 5;
    std::size_t s_dim = 16;
    std::size_t v_dim = 8;
    std::size_t hidden = 128;

    std::size_t image_numel() const { return image_h * image_w; }
};

inline Tensor flattened(const Tensor& img) {
    return Tensor(Shape{img.numel()}, std::vector<double>(img.data(), img.data() + img.numel()));
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// uniform fan-in init, bias zero; RNG stream derived from (seed, param name)
inline Param make_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                         std::uint64_t seed) {
    Tensor w(Shape{fan_in, fan_out});
    auto rng = make_rng(seed, fnv1a(name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < w.numel(); ++k) w[k] = dist(rng);
    return Param(name, std::move(w));
}

inline Param make_bias(const std::string& name, std::size_t n) {
    return Param(name, Tensor(Shape{n}));
}

}  // namespace detail

// Semantic encoder h_s, variation encoder h_v, decoder D and the linear
// classifier head. All three nets are two-layer MLPs over flattened images;
// the decoder's sigmoid output keeps reconstructions inside (0,1).
class ModelBundle {
public:
    ModelDims dims;

    // theta: semantic encoder + classifier head
    Param enc_s_w1, enc_s_b1, enc_s_w2, enc_s_b2, cls_w, cls_b;
    // phi: variation encoder
    Param enc_v_w1, enc_v_b1, enc_v_w2, enc_v_b2;
    // psi: decoder
    Param dec_w1, dec_b1, dec_w2, dec_b2;

    ModelBundle() : ModelBundle(ModelDims{}, 0) {}

    ModelBundle(ModelDims d, std::uint64_t seed) : dims(d) {
        const std::size_t px = dims.image_numel();
        enc_s_w1 = detail::make_weight("enc_s.w1", px, dims.hidden, seed);
        enc_s_b1 = detail::make_bias("enc_s.b1", dims.hidden);
        enc_s_w2 = detail::make_weight("enc_s.w2", dims.hidden, dims.s_dim, seed);
        enc_s_b2 = detail::make_bias("enc_s.b2", dims.s_dim);
        cls_w = detail::make_weight("cls.w", dims.s_dim, dims.classes, seed);
        cls_b = detail::make_bias("cls.b", dims.classes);
        enc_v_w1 = detail::make_weight("enc_v.w1", px, dims.hidden, seed);
        enc_v_b1 = detail::make_bias("enc_v.b1", dims.hidden);
        enc_v_w2 = detail::make_weight("enc_v.w2", dims.hidden, dims.v_dim, seed);
        enc_v_b2 = detail::make_bias("enc_v.b2", dims.v_dim);
        dec_w1 = detail::make_weight("dec.w1", dims.s_dim + dims.v_dim, dims.hidden, seed);
        dec_b1 = detail::make_bias("dec.b1", dims.hidden);
        dec_w2 = detail::make_weight("dec.w2", dims.hidden, px, seed);
        dec_b2 = detail::make_bias("dec.b2", px);
    }

    std::vector<Param*> theta_params() {
        return {&enc_s_w1, &enc_s_b1, &enc_s_w2, &enc_s_b2, &cls_w, &cls_b};
    }
    std::vector<Param*> phi_params() { return {&enc_v_w1, &enc_v_b1, &enc_v_w2, &enc_v_b2}; }
    std::vector<Param*> psi_params() { return {&dec_w1, &dec_b1, &dec_w2, &dec_b2}; }
    std::vector<Param*> all_params() {
        std::vector<Param*> out = theta_params();
        for (Param* p : phi_params()) out.push_back(p);
        for (Param* p : psi_params()) out.push_back(p);
        return out;
    }

    // parameter count: px*hidden + hidden + hidden*dim + dim per encoder,
    // s_dim*C + C for the head, (s+v)*hidden + hidden + hidden*px + px decoder
    std::size_t parameter_count() {
        std::size_t n = 0;
        for (Param* p : all_params()) n += p->value.numel();
        return n;
    }

    // ---- taped forwards (x is a flattened [H*W] node) ----------------------

    Value encode_semantic_t(Tape& tape, Value x) {
        Value h = relu(add_bias(matmul(x, tape.leaf(enc_s_w1)), tape.leaf(enc_s_b1)));
        return add_bias(matmul(h, tape.leaf(enc_s_w2)), tape.leaf(enc_s_b2));
    }

    Value encode_variation_t(Tape& tape, Value x) {
        Value h = relu(add_bias(matmul(x, tape.leaf(enc_v_w1)), tape.leaf(enc_v_b1)));
        return add_bias(matmul(h, tape.leaf(enc_v_w2)), tape.leaf(enc_v_b2));
    }

    Value classify_t(Tape& tape, Value s) {
        return add_bias(matmul(s, tape.leaf(cls_w)), tape.leaf(cls_b));
    }

    Value decode_t(Tape& tape, Value s, Value v) {
        Value z = concat(s, v);
        Value h = relu(add_bias(matmul(z, tape.leaf(dec_w1)), tape.leaf(dec_b1)));
        return sigmoid(add_bias(matmul(h, tape.leaf(dec_w2)), tape.leaf(dec_b2)));
    }

    Value image_node(Tape& tape, const Tensor& img) {
        check_image(img);
        return tape.constant(flattened(img));
    }

    // x_hat = D(h_s(x_i) (+) h_v(x_j)); gradients flow into theta, phi, psi
    Value reconstruct_pair_t(Tape& tape, Value xi, Value xj) {
        return decode_t(tape, encode_semantic_t(tape, xi), encode_variation_t(tape, xj));
    }

    // ---- eval wrappers -----------------------------------------------------

    LatentCode encode_semantic(const Tensor& img) {
        Tape tape;
        return {CodeKind::semantic, encode_semantic_t(tape, image_node(tape, img)).val()};
    }

    LatentCode encode_variation(const Tensor& img) {
        Tape tape;
        return {CodeKind::variation, encode_variation_t(tape, image_node(tape, img)).val()};
    }

    Tensor decode(const LatentCode& s, const LatentCode& v) {
        check_code(s, CodeKind::semantic, "decode");
        check_code(v, CodeKind::variation, "decode");
        Tape tape;
        Tensor flat =
            decode_t(tape, tape.constant(s.values), tape.constant(v.values)).val();
        return Tensor(Shape{dims.image_h, dims.image_w},
                      std::vector<double>(flat.data(), flat.data() + flat.numel()));
    }

    Tensor classify(const LatentCode& s) {
        check_code(s, CodeKind::semantic, "classify");
        Tape tape;
        return classify_t(tape, tape.constant(s.values)).val();
    }

    Tensor reconstruct_pair(const Tensor& x_i, const Tensor& x_j) {
        return decode(encode_semantic(x_i), encode_variation(x_j));
    }

    void check_image(const Tensor& img) const {
        if (img.rank() != 2 || img.dim(0) != dims.image_h || img.dim(1) != dims.image_w)
            throw ShapeError("model: expected image [" + std::to_string(dims.image_h) + "," +
                             std::to_string(dims.image_w) + "], got " + shape_str(img.shape()));
    }

private:
    void check_code(const LatentCode& c, CodeKind want, const char* op) const {
        if (c.kind != want)
            throw ConfigError(std::string(op) + ": latent code has the wrong kind");
        const std::size_t want_len = want == CodeKind::semantic ? dims.s_dim : dims.v_dim;
        if (c.values.numel() != want_len)
            throw ShapeError(std::string(op) + ": latent code length " +
                             std::to_string(c.values.numel()) + ", expected " +
                             std::to_string(want_len));
    }
};

}  // namespace ddg
