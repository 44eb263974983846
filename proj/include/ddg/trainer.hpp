#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddg/adam.hpp"
#include "ddg/autograd.hpp"
#include "ddg/dataio.hpp"
#include "ddg/models.hpp"

namespace ddg {

enum class PairingMode { shift, all_pairs };
enum class ConstraintMode { hinge, raw };
enum class TrainMode { ddg, erm };

struct TrainConfig {
    double gamma = -1.0;  // resolved from data when gamma_auto
    bool gamma_auto = true;
    double lambda0 = 0.1;
    double eta1 = 1e-3;   // primal lr
    double eta2 = 0.01;   // dual lr
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    PairingMode pairing = PairingMode::shift;
    ConstraintMode constraint_mode = ConstraintMode::hinge;
    bool augment = false;
    bool cycle = false;
    double cycle_weight = 1.0;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::ddg;
    bool early_stop = false;
    std::size_t patience = 5;

    void validate() const {
        if (!gamma_auto && !(gamma >= 0.0))
            throw ConfigError("train: gamma must be >= 0 (or auto)");
        if (!(eta1 > 0.0) || !(eta2 > 0.0))
            throw ConfigError("train: learning rates must be positive");
        if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (lambda0 < 0.0) throw ConfigError("train: lambda0 must be >= 0");
    }
};

struct DualState {
    double lambda = 0.0;
    struct Entry {
        std::size_t step;
        double lambda;
        double mean_l_con;
    };
    std::vector<Entry> history;
};

struct LossBreakdown {
    double l_erm = 0.0;
    double l_con = 0.0;
    double l_aug = 0.0;
    double l_cyc = 0.0;
    double lagrangian = 0.0;
};

struct MetricsRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    LossBreakdown losses;
    double lambda = 0.0;
    std::optional<double> val_acc;
};

inline constexpr const char* kMetricsHeader =
    "step,epoch,L_erm,L_con,L_aug,L_cyc,lagrangian,lambda,val_acc";

// ---- loss terms (taped) ----------------------------------------------------

namespace detail {

struct ConstraintTerm {
    Value loss;   // scalar
    Value recon;  // flattened x_hat, reused by the augmentation branch
};

inline ConstraintTerm constraint_term(Tape& tape, ModelBundle& model, Value xi, Value xj,
                                      double gamma, ConstraintMode mode) {
    Value recon = model.reconstruct_pair_t(tape, xi, xj);
    Value l1 = l1_distance(xi, recon);
    Value loss = [&] {
        if (std::isinf(gamma)) {
            // hinge at an infinite margin is identically zero with zero gradient
            if (mode == ConstraintMode::raw)
                throw ConfigError("constraint_loss: infinite gamma requires hinge mode");
            return tape.constant(Tensor::scalar(0.0));
        }
        Value shifted = add_scalar(l1, -gamma);
        return mode == ConstraintMode::hinge ? relu(shifted) : shifted;
    }();
    return {loss, recon};
}

// L*_ERM: the generated image is treated as data (no gradient into the
// generator or the encoding of x_i), then re-encoded and classified.
inline Value augmented_term(Tape& tape, ModelBundle& model, Value recon, std::size_t label) {
    Value detached = tape.constant(recon.val());
    Value logits = model.classify_t(tape, model.encode_semantic_t(tape, detached));
    return softmax_cross_entropy(logits, label);
}

// double-swap reconstruction distance: x -> (swap with x_tilde) -> swap back
inline Value cycle_term(Tape& tape, ModelBundle& model, Value x, Value x_tilde) {
    Value gen_xt = model.reconstruct_pair_t(tape, x, x_tilde);   // x with x_tilde's variation
    Value gen_tx = model.reconstruct_pair_t(tape, x_tilde, x);   // x_tilde with x's variation
    Value back = model.reconstruct_pair_t(tape, gen_xt, gen_tx);
    return l1_distance(x, back);
}

inline double val_accuracy(ModelBundle& model, const Dataset& ds) {
    if (ds.examples.empty()) throw ConfigError("accuracy: empty dataset");
    std::size_t hits = 0;
    for (const auto& ex : ds.examples) {
        Tensor logits = model.classify(model.encode_semantic(ex.image));
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.numel(); ++c)
            if (logits[c] > logits[best]) best = c;
        if (best == ex.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.examples.size());
}

}  // namespace detail

// ---- standalone loss evaluators (the per-pair quantities of the algorithm) -

inline double constraint_loss(ModelBundle& model, const Tensor& x_i, const Tensor& x_j,
                              double gamma, ConstraintMode mode = ConstraintMode::hinge) {
    Tape tape;
    return detail::constraint_term(tape, model, model.image_node(tape, x_i),
                                   model.image_node(tape, x_j), gamma, mode)
        .loss.val()[0];
}

inline double erm_loss(ModelBundle& model, const Tensor& x, std::size_t y) {
    if (y >= model.dims.classes)
        throw ConfigError("erm_loss: label " + std::to_string(y) + " out of range");
    Tape tape;
    Value logits = model.classify_t(tape, model.encode_semantic_t(tape, model.image_node(tape, x)));
    return softmax_cross_entropy(logits, y).val()[0];
}

inline double augmented_loss(ModelBundle& model, const Tensor& x_i, const Tensor& x_j,
                             std::size_t y_i) {
    Tape tape;
    Value recon = model.reconstruct_pair_t(tape, model.image_node(tape, x_i),
                                           model.image_node(tape, x_j));
    return detail::augmented_term(tape, model, recon, y_i).val()[0];
}

inline double cycle_loss(ModelBundle& model, const Tensor& x, const Tensor& x_tilde) {
    Tape tape;
    return detail::cycle_term(tape, model, model.image_node(tape, x),
                              model.image_node(tape, x_tilde))
        .val()[0];
}

// ---- optimizer bundle ------------------------------------------------------

class Trainer {
public:
    Trainer(ModelBundle& model, TrainConfig config) : model_(model), config_(config) {
        config_.validate();
        dual_.lambda = config_.lambda0;
        for (Param* p : model_.all_params())
            adam_.emplace(p, AdamState(p->value.shape(), config_.beta1, config_.beta2));
    }

    const TrainConfig& config() const { return config_; }
    const DualState& dual() const { return dual_; }
    double resolved_gamma() const { return config_.gamma; }

    // gamma = "auto" resolves to 0.25 x mean l1 norm over up to 256 warmup images
    void resolve_gamma(const Dataset& train_set) {
        if (!config_.gamma_auto) return;
        const std::size_t n = std::min<std::size_t>(256, train_set.size());
        if (n == 0) throw ConfigError("resolve_gamma: empty training set");
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor& img = train_set.examples[i].image;
            double s = 0.0;
            for (std::size_t k = 0; k < img.numel(); ++k) s += std::fabs(img[k]);
            total += s;
        }
        config_.gamma = 0.25 * total / static_cast<double>(n);
        config_.gamma_auto = false;
    }

    // One primal update on a batch: theta descends the full per-example loss,
    // phi and psi descend the constraint (and cycle) terms only; lambda fixed.
    LossBreakdown primal_step(const std::vector<const Example*>& batch) {
        const std::size_t b = batch.size();
        if (b < 2) throw ConfigError("primal_step: batch must contain at least 2 examples");
        if (config_.gamma_auto)
            throw ConfigError("primal_step: gamma not resolved; call resolve_gamma first");

        Tape tape;
        std::vector<Value> xs;
        xs.reserve(b);
        for (const Example* ex : batch) xs.push_back(model_.image_node(tape, ex->image));

        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        if (config_.pairing == PairingMode::shift) {
            for (std::size_t i = 0; i < b; ++i) pairs.emplace_back(i, (i + 1) % b);
        } else {
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < b; ++j)
                    if (i != j) pairs.emplace_back(i, j);
        }

        auto mean_of = [&](std::vector<Value>& terms) {
            Value acc = terms[0];
            for (std::size_t k = 1; k < terms.size(); ++k) acc = add(acc, terms[k]);
            return scale(acc, 1.0 / static_cast<double>(terms.size()));
        };

        std::vector<Value> con_terms, erm_terms, aug_terms, cyc_terms;
        for (auto [i, j] : pairs) {
            auto ct = detail::constraint_term(tape, model_, xs[i], xs[j], config_.gamma,
                                              config_.constraint_mode);
            con_terms.push_back(ct.loss);
            if (config_.augment)
                aug_terms.push_back(detail::augmented_term(tape, model_, ct.recon,
                                                           batch[i]->label));
            if (config_.cycle)
                cyc_terms.push_back(detail::cycle_term(tape, model_, xs[i], xs[j]));
        }
        for (std::size_t i = 0; i < b; ++i) {
            Value logits = model_.classify_t(tape, model_.encode_semantic_t(tape, xs[i]));
            erm_terms.push_back(softmax_cross_entropy(logits, batch[i]->label));
        }

        Value mean_erm = mean_of(erm_terms);
        Value mean_con = mean_of(con_terms);
        Value full = add(mean_erm, scale(mean_con, dual_.lambda));
        Value con_target = mean_con;
        LossBreakdown out;
        out.l_erm = mean_erm.val()[0];
        out.l_con = mean_con.val()[0];
        if (config_.augment) {
            Value mean_aug = mean_of(aug_terms);
            out.l_aug = mean_aug.val()[0];
            full = add(full, mean_aug);
        }
        if (config_.cycle) {
            Value mean_cyc = mean_of(cyc_terms);
            out.l_cyc = mean_cyc.val()[0];
            Value weighted = scale(mean_cyc, config_.cycle_weight);
            full = add(full, weighted);
            con_target = add(con_target, weighted);
        }
        out.lagrangian = full.val()[0];

        for (Param* p : model_.all_params()) p->zero_grad();

        if (config_.mode == TrainMode::erm) {
            tape.backward(mean_erm);
            for (Param* p : model_.theta_params()) adam_step(*p, adam_.at(p), config_.eta1);
            return out;
        }

        // phi/psi gradients come from the constraint target alone
        tape.backward(con_target);
        std::map<Param*, Tensor> con_grads;
        for (Param* p : model_.phi_params()) con_grads[p] = p->grad;
        for (Param* p : model_.psi_params()) con_grads[p] = p->grad;
        for (Param* p : model_.all_params()) p->zero_grad();
        tape.clear_grads();

        tape.backward(full);
        for (Param* p : model_.theta_params()) adam_step(*p, adam_.at(p), config_.eta1);
        for (auto& [p, g] : con_grads) {
            p->grad = g;
            adam_step(*p, adam_.at(p), config_.eta1);
        }
        return out;
    }

    // lambda <- max(lambda + eta2 * mean_L_con, 0)
    void dual_step(double mean_l_con, std::size_t step) {
        dual_.lambda = std::max(dual_.lambda + config_.eta2 * mean_l_con, 0.0);
        dual_.history.push_back({step, dual_.lambda, mean_l_con});
    }

    std::vector<MetricsRecord> train(const Dataset& train_set, const Dataset& val_set) {
        if (train_set.examples.empty() || val_set.examples.empty())
            throw ConfigError("train: datasets must be nonempty");
        resolve_gamma(train_set);

        const std::size_t b = config_.batch_size;
        const std::size_t n_batches = train_set.size() / b;
        if (n_batches == 0)
            throw ConfigError("train: fewer training examples than one batch");

        std::vector<MetricsRecord> log;
        auto rng = make_rng(config_.seed);
        std::vector<std::size_t> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        std::size_t step = 0;
        double best_val = -1.0;
        std::size_t since_best = 0;
        for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t bi = 0; bi < n_batches; ++bi) {
                std::vector<const Example*> batch;
                batch.reserve(b);
                for (std::size_t k = 0; k < b; ++k)
                    batch.push_back(&train_set.examples[order[bi * b + k]]);
                MetricsRecord rec;
                rec.step = ++step;
                rec.epoch = epoch;
                try {
                    rec.losses = primal_step(batch);
                } catch (const NumericError& e) {
                    throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
                }
                if (config_.mode == TrainMode::ddg) dual_step(rec.losses.l_con, step);
                rec.lambda = dual_.lambda;
                if (bi + 1 == n_batches) rec.val_acc = detail::val_accuracy(model_, val_set);
                log.push_back(rec);
            }
            if (config_.early_stop) {
                const double va = *log.back().val_acc;
                if (va > best_val) {
                    best_val = va;
                    since_best = 0;
                } else if (++since_best >= config_.patience) {
                    break;
                }
            }
        }
        return log;
    }

private:
    ModelBundle& model_;
    TrainConfig config_;
    DualState dual_;
    std::map<Param*, AdamState> adam_;
};

// ---- metrics CSV -----------------------------------------------------------

inline void write_metrics_csv(const std::vector<MetricsRecord>& log, std::ostream& out) {
    out << kMetricsHeader << '\n';
    for (const auto& r : log) {
        out << r.step << ',' << r.epoch << ',' << fmt_double(r.losses.l_erm) << ','
            << fmt_double(r.losses.l_con) << ',' << fmt_double(r.losses.l_aug) << ','
            << fmt_double(r.losses.l_cyc) << ',' << fmt_double(r.losses.lagrangian) << ','
            << fmt_double(r.lambda) << ',';
        if (r.val_acc) out << fmt_double(*r.val_acc);
        out << '\n';
    }
}

inline void write_metrics_csv(const std::vector<MetricsRecord>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_metrics_csv: cannot open " + path);
    write_metrics_csv(log, out);
}

inline std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw FormatError("metrics CSV: bad header: " + line);
    std::vector<MetricsRecord> log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f;
        MetricsRecord r;
        auto next = [&]() -> std::string {
            if (!std::getline(row, f, ',')) throw FormatError("metrics CSV: short row: " + line);
            return f;
        };
        r.step = std::stoul(next());
        r.epoch = std::stoul(next());
        r.losses.l_erm = std::stod(next());
        r.losses.l_con = std::stod(next());
        r.losses.l_aug = std::stod(next());
        r.losses.l_cyc = std::stod(next());
        r.losses.lagrangian = std::stod(next());
        r.lambda = std::stod(next());
        if (std::getline(row, f, ',') && !f.empty()) r.val_acc = std::stod(f);
        log.push_back(r);
    }
    return log;
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_metrics_csv: cannot open " + path);
    return read_metrics_csv(in);
}

}  // namespace ddg
