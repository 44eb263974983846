#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ddg/adam.hpp"
#include "ddg/rng.hpp"

using namespace ddg;

TEST_CASE("first-step closed form") {
    Param p("p", Tensor({1}, {1.0}));
    p.grad = Tensor({1}, {0.5});
    AdamState st(p.value.shape(), 0.9, 0.999);
    adam_step(p, st, 0.01);
    // m_hat = g, v_hat = g^2 on step 1: delta = -lr * g / (|g| + eps)
    const double expect = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
    REQUIRE_THAT(p.value[0], Catch::Matchers::WithinAbs(expect, 1e-12));
    REQUIRE(st.t == 1);
    REQUIRE(p.grad[0] == 0.0);
}

TEST_CASE("zero gradient moves nothing at any t") {
    Param p("p", Tensor({3}, {1.0, -2.0, 0.5}));
    AdamState st(p.value.shape(), 0.9, 0.999);
    for (int step = 0; step < 5; ++step) {
        adam_step(p, st, 0.1);
        REQUIRE(p.value == Tensor({3}, {1.0, -2.0, 0.5}));
    }
    REQUIRE(st.t == 5);
}

TEST_CASE("first step moves against the gradient") {
    auto rng = make_rng(3);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int rep = 0; rep < 50; ++rep) {
        double g = dist(rng);
        if (g == 0.0) continue;
        Param p("p", Tensor({1}, {0.0}));
        p.grad[0] = g;
        AdamState st(p.value.shape(), 0.9, 0.999);
        adam_step(p, st, 0.01);
        REQUIRE(p.value[0] * g < 0.0);
    }
}

TEST_CASE("invalid learning rate") {
    Param p("p", Tensor({1}, {1.0}));
    AdamState st(p.value.shape(), 0.9, 0.999);
    REQUIRE_THROWS_AS(adam_step(p, st, 0.0), ConfigError);
    REQUIRE_THROWS_AS(adam_step(p, st, -1.0), ConfigError);
}

TEST_CASE("matches a hand-rolled reference over several steps") {
    // independent recomputation of the bias-corrected recurrence
    Param p("p", Tensor({1}, {0.3}));
    AdamState st(p.value.shape(), 0.9, 0.999);
    double ref = 0.3, m = 0, v = 0;
    const double lr = 0.05;
    for (int t = 1; t <= 10; ++t) {
        const double g = 0.1 * t - 0.35;
        p.grad[0] = g;
        adam_step(p, st, lr);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        ref -= lr * mh / (std::sqrt(vh) + 1e-8);
        REQUIRE_THAT(p.value[0], Catch::Matchers::WithinAbs(ref, 1e-14));
    }
}
