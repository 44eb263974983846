#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ddg/adam.hpp"
#include "ddg/autograd.hpp"
#include "ddg/dataio.hpp"
#include "ddg/models.hpp"
#include "ddg/trainer.hpp"

namespace ddg {

struct EvalReport {
    std::map<std::size_t, double> per_domain_acc;
    std::size_t worst_domain = 0;
    double worst_domain_acc = 0.0;
    double avg_acc = 0.0;
    double a_distance_raw = 0.0;
    double a_distance_semantic = 0.0;
    double constraint_sat_rate = 0.0;
    double mean_l1_recon = 0.0;
};

inline double accuracy(ModelBundle& model, const Dataset& ds) {
    return detail::val_accuracy(model, ds);
}

// min over domains, ties broken by lowest domain index
inline std::pair<std::size_t, double> worst_domain_accuracy(
    ModelBundle& model, const std::map<std::size_t, Dataset>& per_domain) {
    if (per_domain.empty()) throw ConfigError("worst_domain_accuracy: no domains");
    std::size_t worst = 0;
    double worst_acc = 2.0;
    for (const auto& [id, ds] : per_domain) {
        const double acc = accuracy(model, ds);
        if (acc < worst_acc) {
            worst_acc = acc;
            worst = id;
        }
    }
    return {worst, worst_acc};
}

namespace detail {

// One logistic-probe fit; returns the test error of the trained probe.
inline double probe_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                          std::uint64_t seed) {
    const std::size_t dim = a[0].numel();
    // 50/50 stratified split of each side
    auto split_half = [&](const std::vector<Tensor>& xs, std::uint64_t stream) {
        std::vector<std::size_t> idx(xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        auto rng = make_rng(seed, stream);
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t half = xs.size() / 2;
        return std::make_pair(std::vector<std::size_t>(idx.begin(), idx.begin() + half),
                              std::vector<std::size_t>(idx.begin() + half, idx.end()));
    };
    auto [a_train, a_test] = split_half(a, 1);
    auto [b_train, b_test] = split_half(b, 2);

    auto stack = [&](const std::vector<Tensor>& xs, const std::vector<std::size_t>& rows,
                     const std::vector<Tensor>& ys, const std::vector<std::size_t>& rows2,
                     std::vector<std::size_t>& labels) {
        Tensor m(Shape{rows.size() + rows2.size(), dim});
        std::size_t r = 0;
        for (std::size_t i : rows) {
            for (std::size_t k = 0; k < dim; ++k) m[r * dim + k] = xs[i][k];
            labels.push_back(0);
            ++r;
        }
        for (std::size_t i : rows2) {
            for (std::size_t k = 0; k < dim; ++k) m[r * dim + k] = ys[i][k];
            labels.push_back(1);
            ++r;
        }
        return m;
    };
    std::vector<std::size_t> train_labels, test_labels;
    Tensor train_x = stack(a, a_train, b, b_train, train_labels);
    Tensor test_x = stack(a, a_test, b, b_test, test_labels);

    Param w("probe.w", Tensor(Shape{dim, 2}));
    {
        auto rng = make_rng(seed, 3);
        std::uniform_real_distribution<double> dist(-0.01, 0.01);
        for (std::size_t k = 0; k < w.value.numel(); ++k) w.value[k] = dist(rng);
    }
    Param bias("probe.b", Tensor(Shape{2}));
    AdamState ws(w.value.shape(), 0.9, 0.999), bs(bias.value.shape(), 0.9, 0.999);

    for (int step = 0; step < 200; ++step) {
        Tape tape;
        Value logits = add_bias(matmul(tape.constant(train_x), tape.leaf(w)), tape.leaf(bias));
        Value loss = softmax_cross_entropy_batch(logits, train_labels);
        tape.backward(loss);
        adam_step(w, ws, 0.01);
        adam_step(bias, bs, 0.01);
    }

    std::size_t wrong = 0;
    for (std::size_t r = 0; r < test_labels.size(); ++r) {
        double s0 = bias.value[0], s1 = bias.value[1];
        for (std::size_t k = 0; k < dim; ++k) {
            s0 += test_x[r * dim + k] * w.value.at(k, 0);
            s1 += test_x[r * dim + k] * w.value.at(k, 1);
        }
        const std::size_t pred = s1 > s0 ? 1 : 0;
        if (pred != test_labels[r]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(test_labels.size());
}

}  // namespace detail

// Proxy A-distance d_A = 2(1 - 2*sigma), sigma the mean test error of a
// logistic two-sample probe over 3 derived-seed repeats; clamped to [0,2].
inline double a_distance(const std::vector<Tensor>& features_a,
                         const std::vector<Tensor>& features_b, std::uint64_t probe_seed) {
    if (features_a.empty() || features_b.empty())
        throw ConfigError("a_distance: feature lists must be nonempty");
    const std::size_t dim = features_a[0].numel();
    for (const auto& t : features_a)
        if (t.numel() != dim) throw ShapeError("a_distance: feature width mismatch in list a");
    for (const auto& t : features_b)
        if (t.numel() != dim) throw ShapeError("a_distance: feature width mismatch between lists");
    if (features_a.size() < 4 || features_b.size() < 4)
        throw ConfigError("a_distance: need at least 4 samples per side");

    double sigma = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep)
        sigma += detail::probe_error(features_a, features_b, hash_combine(probe_seed, rep));
    sigma /= 3.0;
    return std::clamp(2.0 * (1.0 - 2.0 * sigma), 0.0, 2.0);
}

// Fraction of seeded random (x, x_tilde) pairs with l1 reconstruction
// distance <= gamma.
inline double constraint_satisfaction_rate(ModelBundle& model, const Dataset& ds, double gamma,
                                           std::size_t n_pairs, std::uint64_t seed) {
    if (n_pairs < 1) throw ConfigError("constraint_satisfaction_rate: n_pairs must be >= 1");
    if (ds.size() < 2) throw ConfigError("constraint_satisfaction_rate: need >= 2 examples");
    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    std::size_t sat = 0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t i = pick(rng);
        std::size_t j = pick(rng);
        if (j == i) j = (j + 1) % ds.size();
        const Tensor& x = ds.examples[i].image;
        Tensor recon = model.reconstruct_pair(x, ds.examples[j].image);
        double l1 = 0.0;
        for (std::size_t k = 0; k < x.numel(); ++k) l1 += std::fabs(x[k] - recon[k]);
        if (l1 <= gamma) ++sat;
    }
    return static_cast<double>(sat) / static_cast<double>(n_pairs);
}

inline double mean_l1_reconstruction(ModelBundle& model, const Dataset& ds, std::size_t n_pairs,
                                     std::uint64_t seed) {
    if (ds.size() < 2) throw ConfigError("mean_l1_reconstruction: need >= 2 examples");
    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    double total = 0.0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t i = pick(rng);
        std::size_t j = pick(rng);
        if (j == i) j = (j + 1) % ds.size();
        const Tensor& x = ds.examples[i].image;
        Tensor recon = model.reconstruct_pair(x, ds.examples[j].image);
        for (std::size_t k = 0; k < x.numel(); ++k) total += std::fabs(x[k] - recon[k]);
    }
    return total / static_cast<double>(n_pairs);
}

struct DualDiagnostics {
    double lambda_final = 0.0;
    double lambda_max = 0.0;
    double mean_l_con_trend = 0.0;   // last-epoch mean / first-epoch mean
    double lagrangian_trend = 0.0;
};

inline DualDiagnostics dual_diagnostics(const std::vector<MetricsRecord>& log) {
    if (log.empty()) throw FormatError("dual_diagnostics: empty metrics log");
    DualDiagnostics d;
    d.lambda_final = log.back().lambda;
    for (const auto& r : log) d.lambda_max = std::max(d.lambda_max, r.lambda);

    const std::size_t first_epoch = log.front().epoch;
    const std::size_t last_epoch = log.back().epoch;
    double first_con = 0, first_lag = 0, last_con = 0, last_lag = 0;
    std::size_t n_first = 0, n_last = 0;
    for (const auto& r : log) {
        if (r.epoch == first_epoch) {
            first_con += r.losses.l_con;
            first_lag += r.losses.lagrangian;
            ++n_first;
        }
        if (r.epoch == last_epoch) {
            last_con += r.losses.l_con;
            last_lag += r.losses.lagrangian;
            ++n_last;
        }
    }
    first_con /= static_cast<double>(n_first);
    first_lag /= static_cast<double>(n_first);
    last_con /= static_cast<double>(n_last);
    last_lag /= static_cast<double>(n_last);
    d.mean_l_con_trend = first_con != 0.0 ? last_con / first_con : 0.0;
    d.lagrangian_trend = first_lag != 0.0 ? last_lag / first_lag : 0.0;
    return d;
}

// flat key=value serialization of an EvalReport
inline void write_report(const EvalReport& r, std::ostream& out) {
    for (const auto& [id, acc] : r.per_domain_acc)
        out << "acc_domain_" << id << '=' << fmt_double(acc) << '\n';
    out << "worst_domain=" << r.worst_domain << '\n';
    out << "worst_domain_acc=" << fmt_double(r.worst_domain_acc) << '\n';
    out << "avg_acc=" << fmt_double(r.avg_acc) << '\n';
    out << "a_distance_raw=" << fmt_double(r.a_distance_raw) << '\n';
    out << "a_distance_semantic=" << fmt_double(r.a_distance_semantic) << '\n';
    out << "constraint_sat_rate=" << fmt_double(r.constraint_sat_rate) << '\n';
    out << "mean_l1_recon=" << fmt_double(r.mean_l1_recon) << '\n';
}

}  // namespace ddg
