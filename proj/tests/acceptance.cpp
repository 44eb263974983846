// Acceptance harness: one pass/fail line per criterion, exit 0 iff all pass.
// argv[1] is the path to the command-line binary (used by the determinism
// criterion); everything else runs in-process against the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ddg/ddg.hpp"
#include "ddg/finite_diff.hpp"

using namespace ddg;
namespace fs = std::filesystem;

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool grad_close(double fd, double ad) {
    return std::fabs(fd - ad) <= 1e-5 * std::max(std::fabs(fd), std::fabs(ad)) + 1e-7;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("acceptance: cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

ModelDims tiny_dims() {
    ModelDims d;
    d.image_h = d.image_w = 6;
    d.classes = 3;
    d.s_dim = 4;
    d.v_dim = 2;
    d.hidden = 8;
    return d;
}

Tensor random_image(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor img(Shape{n, n});
    for (std::size_t k = 0; k < img.numel(); ++k) img[k] = dist(rng);
    return img;
}

Dataset keep_domain(const Dataset& ds, std::size_t domain_id, bool keep) {
    Dataset out;
    out.domains = ds.domains;
    for (const auto& ex : ds.examples)
        if ((ex.domain_id == domain_id) == keep) out.examples.push_back(ex);
    return out;
}

// ---- criterion 1: gradient oracle -------------------------------------------

// Compares reverse-mode gradients with central finite differences for one
// parametrized scalar graph; the builder must be a pure function of p.value.
template <typename Build>
bool gradcheck(Param& p, Build&& build, std::string& why, const char* name) {
    Tape tape;
    Value out = build(tape, tape.leaf(p));
    p.zero_grad();
    tape.backward(out);
    auto f = [&](const Tensor& probe) {
        Tensor saved = p.value;
        p.value = probe;
        Tape t2;
        double v = build(t2, t2.leaf(p)).val()[0];
        p.value = saved;
        return v;
    };
    Tensor fd = finite_diff_grad(f, p.value, 1e-5);
    for (std::size_t k = 0; k < fd.numel(); ++k)
        if (!grad_close(fd[k], p.grad[k])) {
            std::ostringstream os;
            os << name << " entry " << k << ": fd=" << fd[k] << " ad=" << p.grad[k];
            why = os.str();
            return false;
        }
    return true;
}

bool criterion1(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rng = make_rng(2024);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto rand_tensor = [&](Shape s, double away = 0.0) {
        Tensor t(std::move(s));
        for (std::size_t k = 0; k < t.numel(); ++k) {
            double v = unif(rng);
            if (away > 0.0) v += v >= 0.0 ? away : -away;
            t[k] = v;
        }
        return t;
    };

    std::string why;
    bool ok = true;
    constexpr int kReps = 20;

    for (int rep = 0; rep < kReps && ok; ++rep) {
        // per-op checks; all random constants fixed per repetition
        {
            Tensor B = rand_tensor({5, 3});
            Param p("p", rand_tensor({5}));
            ok = gradcheck(p, [&](Tape& t, Value v) { return reduce_sum(matmul(v, t.constant(B))); },
                           why, "matmul(vec,mat) left");
            if (!ok) break;
        }
        {
            Tensor A = rand_tensor({2, 5});
            Param p("p", rand_tensor({5, 3}));
            ok = gradcheck(p, [&](Tape& t, Value v) { return reduce_sum(matmul(t.constant(A), v)); },
                           why, "matmul(mat,mat) right");
            if (!ok) break;
        }
        {
            Tensor X = rand_tensor({3, 4});
            Param p("p", rand_tensor({4}));
            ok = gradcheck(p, [&](Tape& t, Value v) { return reduce_sum(add_bias(t.constant(X), v)); },
                           why, "add_bias bias");
            if (!ok) break;
        }
        {
            Tensor C = rand_tensor({6});
            Param p("p", rand_tensor({6}));
            ok = gradcheck(p, [&](Tape& t, Value v) { return reduce_sum(add(v, t.constant(C))); },
                           why, "add") &&
                 gradcheck(p, [&](Tape& t, Value v) { return reduce_sum(sub(t.constant(C), v)); },
                           why, "sub");
            if (!ok) break;
        }
        {
            Param p("p", rand_tensor({6}, 0.1));  // keep clear of the relu/abs kinks
            ok = gradcheck(p, [&](Tape&, Value v) { return reduce_sum(relu(v)); }, why, "relu") &&
                 gradcheck(p, [&](Tape&, Value v) { return reduce_sum(abs(v)); }, why, "abs");
            if (!ok) break;
        }
        {
            Param p("p", rand_tensor({6}));
            ok = gradcheck(p, [&](Tape&, Value v) { return reduce_sum(sigmoid(v)); }, why,
                           "sigmoid") &&
                 gradcheck(p, [&](Tape&, Value v) { return reduce_sum(scale(v, 1.7)); }, why,
                           "scale") &&
                 gradcheck(p, [&](Tape&, Value v) { return reduce_sum(add_scalar(v, -0.3)); }, why,
                           "add_scalar") &&
                 gradcheck(p, [&](Tape&, Value v) { return reduce_sum(v); }, why, "reduce_sum") &&
                 gradcheck(p, [&](Tape&, Value v) { return reduce_mean(v); }, why, "reduce_mean");
            if (!ok) break;
        }
        {
            Tensor tail = rand_tensor({3});
            Param p("p", rand_tensor({4}));
            ok = gradcheck(p,
                           [&](Tape& t, Value v) { return reduce_sum(concat(v, t.constant(tail))); },
                           why, "concat");
            if (!ok) break;
        }
        {
            Param p("p", rand_tensor({5}));
            const std::size_t label = static_cast<std::size_t>(rep) % 5;
            ok = gradcheck(p, [&](Tape&, Value v) { return softmax_cross_entropy(v, label); }, why,
                           "softmax_cross_entropy");
            if (!ok) break;
        }
        {
            Param p("p", rand_tensor({4, 3}));
            std::vector<std::size_t> labels = {static_cast<std::size_t>(rep) % 3, 0, 2, 1};
            ok = gradcheck(p, [&](Tape&, Value v) { return softmax_cross_entropy_batch(v, labels); },
                           why, "softmax_cross_entropy_batch");
            if (!ok) break;
        }
        {
            // keep every |a-b| well away from the kink; h=1e-5 cannot cross it
            Tensor ref = rand_tensor({6});
            Tensor offset = rand_tensor({6}, 0.2);
            Tensor start = ref;
            for (std::size_t k = 0; k < start.numel(); ++k) start[k] += offset[k];
            Param p("p", start);
            ok = gradcheck(p, [&](Tape& t, Value v) { return l1_distance(v, t.constant(ref)); },
                           why, "l1_distance");
            if (!ok) break;
        }
    }

    // composed losses on a small model; check one parameter of each network
    const ModelDims td = tiny_dims();
    for (int rep = 0; rep < kReps && ok; ++rep) {
        ModelBundle m(td, static_cast<std::uint64_t>(rep) + 1);
        Tensor xi = random_image(rng, 6);
        Tensor xj = random_image(rng, 6);
        const std::size_t y = static_cast<std::size_t>(rep) % td.classes;
        std::vector<Param*> probes = {&m.enc_s_w2, &m.cls_w, &m.enc_v_w2, &m.dec_w1, &m.dec_b2};

        auto check_loss = [&](const char* name, auto&& taped, auto&& scalar,
                              const std::vector<Param*>& params) {
            Tape tape;
            Value loss = taped(tape);
            for (Param* p : m.all_params()) p->zero_grad();
            tape.backward(loss);
            for (Param* p : params) {
                auto f = [&](const Tensor& probe) {
                    Tensor saved = p->value;
                    p->value = probe;
                    double v = scalar();
                    p->value = saved;
                    return v;
                };
                Tensor fd = finite_diff_grad(f, p->value, 1e-5);
                for (std::size_t k = 0; k < fd.numel(); ++k)
                    if (!grad_close(fd[k], p->grad[k])) {
                        std::ostringstream os;
                        os << name << " wrt " << p->name << " entry " << k << ": fd=" << fd[k]
                           << " ad=" << p->grad[k];
                        why = os.str();
                        return false;
                    }
            }
            return true;
        };

        ok = check_loss(
            "L_erm",
            [&](Tape& t) {
                return softmax_cross_entropy(
                    m.classify_t(t, m.encode_semantic_t(t, m.image_node(t, xi))), y);
            },
            [&] { return erm_loss(m, xi, y); },
            {&m.enc_s_w2, &m.cls_w, &m.enc_s_b1});
        if (!ok) break;

        ok = check_loss(
            "L_con",
            [&](Tape& t) {
                return ddg::detail::constraint_term(t, m, m.image_node(t, xi), m.image_node(t, xj), 1.0,
                                               ConstraintMode::hinge)
                    .loss;
            },
            [&] { return constraint_loss(m, xi, xj, 1.0); }, probes);
        if (!ok) break;

        // the generated image is data for the augmentation branch, so the
        // oracle evaluates plain classification loss on the fixed generation
        Tensor x_star = m.reconstruct_pair(xi, xj);
        ok = check_loss(
            "L_aug",
            [&](Tape& t) {
                Value recon = m.reconstruct_pair_t(t, m.image_node(t, xi), m.image_node(t, xj));
                return ddg::detail::augmented_term(t, m, recon, y);
            },
            [&] { return erm_loss(m, x_star, y); },
            {&m.enc_s_w2, &m.cls_w, &m.enc_s_b1});
        if (!ok) break;

        ok = check_loss(
            "L_cyc",
            [&](Tape& t) {
                return ddg::detail::cycle_term(t, m, m.image_node(t, xi), m.image_node(t, xj));
            },
            [&] { return cycle_loss(m, xi, xj); }, probes);
        if (!ok) break;
    }

    const double secs = elapsed_s(t0);
    if (ok && secs >= 60.0) {
        why = "gradient oracle exceeded the 1 minute budget";
        ok = false;
    }
    std::ostringstream os;
    os << "20 instances per op and per composed loss, rel err < 1e-5, "
       << static_cast<int>(secs * 10) / 10.0 << "s";
    detail = ok ? os.str() : why;
    return ok;
}

// ---- criterion 2: end-to-end determinism ------------------------------------

bool criterion2(const std::string& cli, std::string& detail) {
    if (cli.empty()) {
        detail = "no CLI binary path given (argv[1])";
        return false;
    }
    fs::path ws = fs::temp_directory_path() / "ddg_acceptance_determinism";
    fs::remove_all(ws);
    fs::create_directories(ws);

    const std::string cfg = (ws / "config.json").string();
    {
        std::ofstream out(cfg);
        out << R"({
  "dataset": {"seed": 5, "n_per_domain": 30, "image_size": 8, "glyph_classes": 3,
              "angles": [0, 30, 60], "jitter_px": 1.0},
  "train": {"gamma": "auto", "epochs": 2, "batch_size": 8, "seed": 11,
            "mode": "ddg", "augment": true, "s_dim": 8, "v_dim": 4, "hidden": 32}
})";
    }
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    const std::string data = (ws / "data").string();
    if (run("gen-data --config \"" + cfg + "\" --out \"" + data + "\"") != 0) {
        detail = "gen-data failed";
        return false;
    }
    for (const char* tag : {"run_a", "run_b"}) {
        const std::string out = (ws / tag).string();
        if (run("train --config \"" + cfg + "\" --data \"" + data +
                "\" --holdout-domain 0 --out \"" + out + "\"") != 0) {
            detail = std::string("train failed for ") + tag;
            return false;
        }
    }
    const bool metrics_same = read_file((ws / "run_a" / "metrics.csv").string()) ==
                              read_file((ws / "run_b" / "metrics.csv").string());
    const bool ckpt_same = read_file((ws / "run_a" / "checkpoint.ddgc").string()) ==
                           read_file((ws / "run_b" / "checkpoint.ddgc").string());
    detail = metrics_same && ckpt_same
                 ? "two CLI train runs: metrics CSV and checkpoint byte-identical"
                 : std::string("mismatch: metrics ") + (metrics_same ? "same" : "differ") +
                       ", checkpoint " + (ckpt_same ? "same" : "differ");
    return metrics_same && ckpt_same;
}

// ---- criteria 3 and 5 share one full-scale training run ---------------------

struct BigRun {
    ModelBundle model;
    Dataset train, eval, holdout;
    std::vector<MetricsRecord> log;
    double gamma = 0.0;
};

BigRun big_run() {
    DatasetConfig dc;
    dc.seed = 42;
    dc.n_per_domain = 500;
    dc.image_size = 16;
    dc.glyph_classes = 5;
    dc.angles = {0, 15, 30, 45, 60, 75};
    Dataset ds = generate_glyphs(dc);

    BigRun r;
    r.holdout = keep_domain(ds, 0, true);
    Dataset sources = keep_domain(ds, 0, false);
    auto [train, eval] = split(sources, 0.8, 42);
    r.train = std::move(train);
    r.eval = std::move(eval);

    ModelDims dims;  // 16x16, 5 classes, s16 v8 hidden128
    r.model = ModelBundle(dims, 1);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.epochs = 30;
    tc.seed = 1;
    Trainer trainer(r.model, tc);
    r.log = trainer.train(r.train, r.holdout);
    r.gamma = trainer.resolved_gamma();
    return r;
}

bool criterion3(const BigRun& r, ModelBundle& model, std::string& detail) {
    bool lambda_ok = true;
    for (const auto& rec : r.log) lambda_ok = lambda_ok && rec.lambda >= 0.0;
    DualDiagnostics d = dual_diagnostics(r.log);
    const double sat =
        constraint_satisfaction_rate(model, r.train, r.gamma * 1.05, 200, 17);
    std::ostringstream os;
    os << "lambda>=0 " << (lambda_ok ? "yes" : "NO") << ", L_con last/first epoch = "
       << d.mean_l_con_trend << " (need <= 0.5), sat rate at 1.05*gamma = " << sat
       << " (need >= 0.9)";
    detail = os.str();
    return lambda_ok && d.mean_l_con_trend <= 0.5 && sat >= 0.9;
}

bool criterion5(const BigRun& r, ModelBundle& model, std::string& detail) {
    auto collect = [&](const Dataset& ds, std::uint64_t stream) {
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        auto rng = make_rng(99, stream);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min<std::size_t>(200, idx.size()));
        std::vector<Tensor> raw, sem;
        for (std::size_t i : idx) {
            raw.push_back(flattened(ds.examples[i].image));
            sem.push_back(model.encode_semantic(ds.examples[i].image).values);
        }
        return std::make_pair(raw, sem);
    };
    auto [src_raw, src_sem] = collect(r.eval, 1);
    auto [hold_raw, hold_sem] = collect(r.holdout, 2);

    std::vector<double> d_raw, d_sem;
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        d_raw.push_back(a_distance(src_raw, hold_raw, seed));
        d_sem.push_back(a_distance(src_sem, hold_sem, seed));
    }
    const double med_raw = median3(d_raw), med_sem = median3(d_sem);

    // sanity anchors on synthetic blobs
    auto blob = [&](double mean, std::uint64_t seed) {
        std::vector<Tensor> out;
        auto rng = make_rng(seed);
        std::normal_distribution<double> dist(mean, 1.0);
        for (std::size_t i = 0; i < 60; ++i) out.push_back(Tensor({2}, {dist(rng), dist(rng)}));
        return out;
    };
    const double separated = a_distance(blob(-10.0, 1), blob(10.0, 2), 3);
    const double identical = a_distance(blob(0.0, 4), blob(0.0, 5), 3);

    std::ostringstream os;
    os << "median d_A semantic = " << med_sem << " < raw = " << med_raw
       << "; anchors: separated " << separated << " (>1.8), identical " << identical << " (<0.2)";
    detail = os.str();
    return med_sem < med_raw && separated > 1.8 && identical < 0.2;
}

// ---- criterion 4: out-of-distribution direction ------------------------------

bool criterion4(std::string& detail) {
    DatasetConfig dc;
    dc.seed = 7;
    dc.n_per_domain = 400;
    dc.image_size = 16;
    dc.glyph_classes = 5;
    dc.angles = {0, 15, 30, 45, 60, 75};
    Dataset ds = generate_glyphs(dc);

    ModelDims dims;
    dims.hidden = 64;

    struct Outcome {
        double holdout_acc, worst_acc;
    };
    auto run_one = [&](std::size_t holdout_id, std::uint64_t seed, TrainMode mode, bool augment) {
        Dataset holdout = keep_domain(ds, holdout_id, true);
        Dataset sources = keep_domain(ds, holdout_id, false);
        auto [train, eval] = split(sources, 0.8, seed);

        ModelBundle model(dims, seed);
        // generous margin and gentle dual step: the constraint trains the
        // generator early, then closes so classification is not starved
        TrainConfig tc;
        tc.batch_size = 16;
        tc.epochs = 70;
        tc.eta2 = 5e-4;
        tc.seed = seed;
        tc.mode = mode;
        tc.augment = augment;
        {
            Trainer probe(model, tc);
            probe.resolve_gamma(train);
            tc.gamma = probe.resolved_gamma() * 3.0;
            tc.gamma_auto = false;
        }
        Trainer trainer(model, tc);
        trainer.train(train, holdout);

        std::map<std::size_t, Dataset> per_domain;
        per_domain[holdout_id] = holdout;
        for (std::size_t d = 0; d < ds.domains.size(); ++d)
            if (d != holdout_id) per_domain[d] = keep_domain(eval, d, true);
        Outcome out;
        out.holdout_acc = accuracy(model, holdout);
        out.worst_acc = worst_domain_accuracy(model, per_domain).second;
        return out;
    };

    bool ok = true;
    std::ostringstream os;
    for (std::size_t holdout_id : {std::size_t{0}, std::size_t{5}}) {
        std::vector<double> erm_hold, erm_worst, ddg_hold, ddg_worst, aug_hold, aug_worst;
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            Outcome erm = run_one(holdout_id, seed, TrainMode::erm, false);
            Outcome ddg = run_one(holdout_id, seed, TrainMode::ddg, false);
            Outcome aug = run_one(holdout_id, seed, TrainMode::ddg, true);
            erm_hold.push_back(erm.holdout_acc);
            erm_worst.push_back(erm.worst_acc);
            ddg_hold.push_back(ddg.holdout_acc);
            ddg_worst.push_back(ddg.worst_acc);
            aug_hold.push_back(aug.holdout_acc);
            aug_worst.push_back(aug.worst_acc);
        }
        const double me_h = median3(erm_hold), ma_h = median3(aug_hold);
        const double me_w = median3(erm_worst), md_w = median3(ddg_worst);
        const bool hold_ok = ma_h >= me_h;
        const bool worst_ok = md_w >= me_w - 0.01;
        ok = ok && hold_ok && worst_ok;
        os << "holdout " << holdout_id << ": aug " << ma_h << (hold_ok ? " >= " : " < ") << "erm "
           << me_h << ", worst ddg " << md_w << (worst_ok ? " >= " : " < ") << "erm " << me_w
           << "-0.01; ";
        std::cerr << "  [criterion 4] holdout " << holdout_id << " medians: erm " << me_h << "/"
                  << me_w << " ddg " << median3(ddg_hold) << "/" << md_w << " aug " << ma_h << "/"
                  << median3(aug_worst) << "\n";
    }
    detail = os.str();
    return ok;
}

// ---- criterion 6: interpolation endpoints ------------------------------------

bool criterion6(std::string& detail) {
    ModelBundle m(tiny_dims(), 3);
    auto rng = make_rng(6);
    Tensor x = random_image(rng, 6), xt = random_image(rng, 6);

    auto images = interpolate_variation(m, x, xt, {1.0, 0.5, 0.0});
    const bool start_ok = images[0] == m.decode(m.encode_semantic(x), m.encode_variation(x));
    const bool end_ok = images[2] == m.decode(m.encode_semantic(x), m.encode_variation(xt));

    Tensor va = m.encode_variation(x).values;
    Tensor vb = m.encode_variation(xt).values;
    Tensor mid = ddg::detail::mix_codes(va, vb, 0.5);
    double worst = 0.0;
    for (std::size_t k = 0; k < mid.numel(); ++k)
        worst = std::max(worst, std::fabs(mid[k] - 0.5 * (va[k] + vb[k])));

    std::ostringstream os;
    os << "endpoints bitwise " << (start_ok && end_ok ? "equal" : "DIFFER")
       << ", mid-step latent within " << worst << " of the arithmetic mean (need <= 1e-12)";
    detail = os.str();
    return start_ok && end_ok && worst <= 1e-12;
}

// ---- criterion 7: degenerate margin makes DDG coincide with ERM --------------

bool criterion7(std::string& detail) {
    DatasetConfig dc;
    dc.seed = 9;
    dc.n_per_domain = 40;
    dc.image_size = 8;
    dc.glyph_classes = 4;
    dc.angles = {0, 45, 90};
    Dataset ds = generate_glyphs(dc);
    Dataset holdout = keep_domain(ds, 0, true);
    Dataset sources = keep_domain(ds, 0, false);
    auto [train, eval] = split(sources, 0.8, 9);

    ModelDims dims;
    dims.image_h = dims.image_w = 8;
    dims.classes = 4;
    dims.s_dim = 8;
    dims.v_dim = 4;
    dims.hidden = 16;

    auto run_mode = [&](TrainMode mode, ModelBundle& model) {
        TrainConfig tc;
        tc.gamma = std::numeric_limits<double>::infinity();
        tc.gamma_auto = false;
        tc.batch_size = 8;
        tc.epochs = 3;
        tc.seed = 21;
        tc.mode = mode;
        Trainer trainer(model, tc);
        return trainer.train(train, holdout);
    };
    ModelBundle ddg_model(dims, 21), erm_model(dims, 21);
    auto ddg_log = run_mode(TrainMode::ddg, ddg_model);
    auto erm_log = run_mode(TrainMode::erm, erm_model);

    auto erm_column = [](const std::vector<MetricsRecord>& log) {
        std::ostringstream os;
        for (const auto& r : log) os << fmt_double(r.losses.l_erm) << '\n';
        return os.str();
    };
    const bool csv_ok =
        ddg_log.size() == erm_log.size() && erm_column(ddg_log) == erm_column(erm_log);

    bool theta_ok = true;
    auto da = ddg_model.theta_params();
    auto db = erm_model.theta_params();
    for (std::size_t i = 0; i < da.size(); ++i)
        theta_ok = theta_ok && da[i]->value == db[i]->value;

    detail = std::string("infinite margin: L_erm columns ") +
             (csv_ok ? "byte-identical" : "DIFFER") + ", classifier weights " +
             (theta_ok ? "bitwise equal" : "DIFFER");
    return csv_ok && theta_ok;
}

// ---- criterion 8: on-disk format conformance ---------------------------------

bool criterion8(std::string& detail) {
    fs::path ws = fs::temp_directory_path() / "ddg_acceptance_formats";
    fs::remove_all(ws);
    fs::create_directories(ws);
    std::vector<std::string> problems;

    // IDX fixtures: pixel values are exact multiples of 1/255 so the byte
    // round trip is lossless
    Dataset small;
    small.domains = {{0.0}};
    for (std::size_t i = 0; i < 4; ++i) {
        Example ex;
        ex.label = i;
        Tensor img(Shape{5, 5});
        for (std::size_t k = 0; k < img.numel(); ++k)
            img[k] = static_cast<double>((i * 31 + k * 7) % 256) / 255.0;
        ex.image = img;
        small.examples.push_back(std::move(ex));
    }
    const std::string imgs = (ws / "imgs.idx").string();
    const std::string labs = (ws / "labs.idx").string();
    write_idx(small, imgs, labs);
    try {
        Dataset back = load_idx(imgs, labs);
        if (back.size() != 4) problems.push_back("IDX count");
        for (std::size_t i = 0; i < 4 && problems.empty(); ++i) {
            if (back.examples[i].label != small.examples[i].label)
                problems.push_back("IDX labels");
            if (!(back.examples[i].image == small.examples[i].image))
                problems.push_back("IDX pixels not lossless");
        }
    } catch (const Error& e) {
        problems.push_back(std::string("IDX valid fixture rejected: ") + e.what());
    }

    {
        // bad magic
        std::string bytes = read_file(imgs);
        bytes[0] = 0x12;
        bytes[1] = 0x34;
        bytes[2] = 0x56;
        bytes[3] = 0x78;
        const std::string bad = (ws / "bad_magic.idx").string();
        std::ofstream(bad, std::ios::binary).write(bytes.data(),
                                                   static_cast<std::streamsize>(bytes.size()));
        try {
            load_idx(bad, labs);
            problems.push_back("IDX bad magic accepted");
        } catch (const FormatError&) {
        }
    }
    {
        // truncated payload
        std::string bytes = read_file(imgs);
        const std::string trunc = (ws / "trunc.idx").string();
        std::ofstream(trunc, std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 30));
        try {
            load_idx(trunc, labs);
            problems.push_back("IDX truncation accepted");
        } catch (const FormatError&) {
        }
    }
    {
        // count mismatch between image and label files
        Dataset fewer = small;
        fewer.examples.pop_back();
        const std::string labs3 = (ws / "labs3.idx").string();
        write_idx(fewer, (ws / "imgs3.idx").string(), labs3);
        try {
            load_idx(imgs, labs3);
            problems.push_back("IDX count mismatch accepted");
        } catch (const ConsistencyError&) {
        }
    }

    // checkpoint round trip, bitwise
    {
        Checkpoint ckpt;
        ckpt.dims = tiny_dims();
        ckpt.model = ModelBundle(tiny_dims(), 8);
        ckpt.lambda = 0.25;
        ckpt.step = 77;
        const std::string p1 = (ws / "a.ddgc").string();
        const std::string p2 = (ws / "b.ddgc").string();
        save_checkpoint(ckpt, p1);
        save_checkpoint(load_checkpoint(p1), p2);
        if (read_file(p1) != read_file(p2)) problems.push_back("checkpoint round trip not bitwise");
    }

    // PGM header contract: "P5\n<w> <h>\n255\n" then w*h raw bytes
    {
        Tensor img(Shape{3, 5});
        for (std::size_t k = 0; k < img.numel(); ++k)
            img[k] = static_cast<double>(k * 17 % 256) / 255.0;
        const std::string pgm = (ws / "img.pgm").string();
        write_pgm(img, pgm);
        const std::string bytes = read_file(pgm);
        const std::string header = "P5\n5 3\n255\n";
        if (bytes.rfind(header, 0) != 0 || bytes.size() != header.size() + 15)
            problems.push_back("PGM header contract");
        else if (!(read_pgm(pgm) == img))
            problems.push_back("PGM round trip");
    }

    if (problems.empty()) {
        detail = "IDX fixtures, bitwise checkpoint round trip, PGM header all conform";
        return true;
    }
    std::ostringstream os;
    for (const auto& p : problems) os << p << "; ";
    detail = os.str();
    return false;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    bool all_ok = true;
    auto report = [&](int idx, const char* name, bool ok, const std::string& detail) {
        std::cout << "criterion " << idx << " [" << name << "]: " << (ok ? "PASS" : "FAIL")
                  << " -- " << detail << std::endl;
        all_ok = all_ok && ok;
    };
    auto guarded = [&](int idx, const char* name, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cerr << "  [criterion " << idx << "] " << elapsed_s(t0) << "s\n";
        report(idx, name, ok, detail);
    };

    guarded(1, "gradient oracle", [&](std::string& d) { return criterion1(d); });
    guarded(2, "determinism", [&](std::string& d) { return criterion2(cli, d); });

    // criteria 3 and 5 share one 30-epoch constrained training run
    try {
        const auto t0 = std::chrono::steady_clock::now();
        std::cerr << "  [criteria 3+5] training 5x500 source examples, 30 epochs...\n";
        BigRun r = big_run();
        std::cerr << "  [criteria 3+5] trained in " << elapsed_s(t0) << "s\n";
        guarded(3, "primal-dual behavior", [&](std::string& d) { return criterion3(r, r.model, d); });
        guarded(4, "out-of-distribution direction", [&](std::string& d) { return criterion4(d); });
        guarded(5, "feature invariance (A-distance)",
                [&](std::string& d) { return criterion5(r, r.model, d); });
    } catch (const std::exception& e) {
        report(3, "primal-dual behavior", false, std::string("exception: ") + e.what());
        guarded(4, "out-of-distribution direction", [&](std::string& d) { return criterion4(d); });
        report(5, "feature invariance (A-distance)", false, "skipped: shared training run failed");
    }

    guarded(6, "interpolation endpoints", [&](std::string& d) { return criterion6(d); });
    guarded(7, "degenerate-margin equivalence", [&](std::string& d) { return criterion7(d); });
    guarded(8, "format conformance", [&](std::string& d) { return criterion8(d); });

    std::cout << (all_ok ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << std::endl;
    return all_ok ? 0 : 1;
}
