#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ddg/dataio.hpp"
#include "ddg/finite_diff.hpp"
#include "ddg/models.hpp"

using namespace ddg;

namespace {

ModelDims tiny_dims() {
    ModelDims d;
    d.image_h = d.image_w = 6;
    d.classes = 3;
    d.s_dim = 4;
    d.v_dim = 2;
    d.hidden = 8;
    return d;
}

Tensor test_image(std::uint64_t seed, std::size_t n) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor img(Shape{n, n});
    for (std::size_t k = 0; k < img.numel(); ++k) img[k] = dist(rng);
    return img;
}

}  // namespace

TEST_CASE("encoder output shapes and determinism") {
    ModelBundle m(tiny_dims(), 1);
    Tensor x = test_image(2, 6);

    LatentCode s = m.encode_semantic(x);
    LatentCode v = m.encode_variation(x);
    REQUIRE(s.kind == CodeKind::semantic);
    REQUIRE(v.kind == CodeKind::variation);
    REQUIRE(s.values.numel() == 4);
    REQUIRE(v.values.numel() == 2);

    REQUIRE(m.encode_semantic(x).values == s.values);
    REQUIRE(m.encode_variation(x).values == v.values);

    // distinct images give distinct codes at random init
    Tensor y = test_image(3, 6);
    REQUIRE_FALSE(m.encode_semantic(y).values == s.values);

    REQUIRE_THROWS_AS(m.encode_semantic(Tensor(Shape{4, 4})), ShapeError);
}

TEST_CASE("decode contract") {
    ModelBundle m(tiny_dims(), 1);
    Tensor x = test_image(2, 6);
    LatentCode s = m.encode_semantic(x);
    LatentCode v = m.encode_variation(x);

    Tensor img = m.decode(s, v);
    REQUIRE(img.shape() == Shape{6, 6});
    for (std::size_t k = 0; k < img.numel(); ++k) {
        REQUIRE(img[k] > 0.0);
        REQUIRE(img[k] < 1.0);
    }
    REQUIRE(m.decode(s, v) == img);

    // swapped kinds rejected
    REQUIRE_THROWS_AS(m.decode(v, s), ConfigError);
}

TEST_CASE("classifier head") {
    ModelBundle m(tiny_dims(), 1);
    Tensor x = test_image(2, 6);
    LatentCode s = m.encode_semantic(x);
    Tensor logits = m.classify(s);
    REQUIRE(logits.numel() == 3);

    // zero head -> uniform logits -> cross-entropy ln C
    m.cls_w.value.fill(0.0);
    m.cls_b.value.fill(0.0);
    Tensor z = m.classify(s);
    for (std::size_t k = 0; k < 3; ++k) REQUIRE(z[k] == 0.0);

    REQUIRE_THROWS_AS(m.classify(m.encode_variation(x)), ConfigError);
}

TEST_CASE("parameter count formula") {
    ModelDims d = tiny_dims();
    ModelBundle m(d, 1);
    const std::size_t px = d.image_numel();
    const std::size_t enc_s = px * d.hidden + d.hidden + d.hidden * d.s_dim + d.s_dim;
    const std::size_t head = d.s_dim * d.classes + d.classes;
    const std::size_t enc_v = px * d.hidden + d.hidden + d.hidden * d.v_dim + d.v_dim;
    const std::size_t dec = (d.s_dim + d.v_dim) * d.hidden + d.hidden + d.hidden * px + px;
    REQUIRE(m.parameter_count() == enc_s + head + enc_v + dec);
}

TEST_CASE("reconstruct_pair composition and gradient flow") {
    ModelBundle m(tiny_dims(), 1);
    Tensor xi = test_image(2, 6);
    Tensor xj = test_image(3, 6);

    Tensor recon = m.reconstruct_pair(xi, xj);
    REQUIRE(recon.shape() == Shape{6, 6});
    REQUIRE(recon == m.decode(m.encode_semantic(xi), m.encode_variation(xj)));

    // finite differences through the full composition, for one weight of each net
    auto loss_at = [&](Param& p) {
        return [&m, &xi, &xj, &p](const Tensor& probe) {
            Tensor saved = p.value;
            p.value = probe;
            Tape tape;
            double out = l1_distance(m.image_node(tape, xi),
                                     m.reconstruct_pair_t(tape, m.image_node(tape, xi),
                                                          m.image_node(tape, xj)))
                             .val()[0];
            p.value = saved;
            return out;
        };
    };

    Tape tape;
    Value loss = l1_distance(m.image_node(tape, xi),
                             m.reconstruct_pair_t(tape, m.image_node(tape, xi),
                                                  m.image_node(tape, xj)));
    for (Param* p : m.all_params()) p->zero_grad();
    tape.backward(loss);

    for (Param* p : {&m.enc_s_w2, &m.enc_v_w2, &m.dec_w1}) {
        Tensor fd = finite_diff_grad(loss_at(*p), p->value, 1e-5);
        double worst = 0;
        for (std::size_t k = 0; k < fd.numel(); ++k) {
            const double tol = 1e-5 * std::max(std::fabs(fd[k]), std::fabs(p->grad[k])) + 1e-7;
            worst = std::max(worst, std::fabs(fd[k] - p->grad[k]) - tol);
        }
        REQUIRE(worst <= 0.0);
        // gradient actually flows
        bool nonzero = false;
        for (std::size_t k = 0; k < p->grad.numel(); ++k) nonzero |= p->grad[k] != 0.0;
        REQUIRE(nonzero);
    }
}
