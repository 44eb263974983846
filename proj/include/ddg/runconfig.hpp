#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "ddg/checkpoint.hpp"
#include "ddg/dataio.hpp"
#include "ddg/trainer.hpp"

namespace ddg {

struct EvalConfig {
    std::size_t n_pairs = 200;
    std::uint64_t probe_seed = 7;
    std::size_t a_distance_samples = 400;  // per side, subsampled deterministically
};

struct ManipulateConfig {
    std::size_t n_semantic = 4;
    std::size_t n_variation = 4;
    std::vector<double> steps = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    std::uint64_t seed = 0;
};

struct RunConfig {
    DatasetConfig dataset;
    TrainConfig train;
    ModelDims dims;
    EvalConfig eval;
    ManipulateConfig manipulate;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("run config: unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("run config: top level must be an object");
    detail::reject_unknown(j, {"dataset", "train", "eval", "manipulate"}, "top level");
    RunConfig rc;

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::reject_unknown(d,
                               {"seed", "n_per_domain", "image_size", "glyph_classes", "angles",
                                "thickness_range", "jitter_px"},
                               "dataset");
        if (d.contains("seed")) rc.dataset.seed = d.at("seed").get<std::uint64_t>();
        if (d.contains("n_per_domain"))
            rc.dataset.n_per_domain = d.at("n_per_domain").get<std::size_t>();
        if (d.contains("image_size")) rc.dataset.image_size = d.at("image_size").get<std::size_t>();
        if (d.contains("glyph_classes"))
            rc.dataset.glyph_classes = d.at("glyph_classes").get<std::size_t>();
        if (d.contains("angles")) rc.dataset.angles = d.at("angles").get<std::vector<double>>();
        if (d.contains("thickness_range")) {
            auto r = d.at("thickness_range").get<std::vector<double>>();
            if (r.size() != 2) throw ConfigError("run config: thickness_range must be [lo,hi]");
            rc.dataset.thickness_lo = r[0];
            rc.dataset.thickness_hi = r[1];
        }
        if (d.contains("jitter_px")) rc.dataset.jitter_px = d.at("jitter_px").get<double>();
        rc.dataset.validate();
    }

    rc.dims.image_h = rc.dims.image_w = rc.dataset.image_size;
    rc.dims.classes = rc.dataset.glyph_classes;

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown(t,
                               {"gamma", "lambda0", "eta1", "eta2", "beta1", "beta2",
                                "batch_size", "epochs", "pairing", "constraint_mode", "augment",
                                "cycle", "cycle_weight", "seed", "mode", "early_stop", "patience",
                                "s_dim", "v_dim", "hidden"},
                               "train");
        if (t.contains("gamma")) {
            if (t.at("gamma").is_string()) {
                if (t.at("gamma").get<std::string>() != "auto")
                    throw ConfigError("run config: gamma must be a number or \"auto\"");
                rc.train.gamma_auto = true;
            } else {
                rc.train.gamma = t.at("gamma").get<double>();
                rc.train.gamma_auto = false;
            }
        }
        if (t.contains("lambda0")) rc.train.lambda0 = t.at("lambda0").get<double>();
        if (t.contains("eta1")) rc.train.eta1 = t.at("eta1").get<double>();
        if (t.contains("eta2")) rc.train.eta2 = t.at("eta2").get<double>();
        if (t.contains("beta1")) rc.train.beta1 = t.at("beta1").get<double>();
        if (t.contains("beta2")) rc.train.beta2 = t.at("beta2").get<double>();
        if (t.contains("batch_size")) rc.train.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("epochs")) rc.train.epochs = t.at("epochs").get<std::size_t>();
        if (t.contains("pairing"))
            rc.train.pairing = pairing_from_string(t.at("pairing").get<std::string>());
        if (t.contains("constraint_mode"))
            rc.train.constraint_mode =
                constraint_from_string(t.at("constraint_mode").get<std::string>());
        if (t.contains("augment")) rc.train.augment = t.at("augment").get<bool>();
        if (t.contains("cycle")) rc.train.cycle = t.at("cycle").get<bool>();
        if (t.contains("cycle_weight")) rc.train.cycle_weight = t.at("cycle_weight").get<double>();
        if (t.contains("seed")) rc.train.seed = t.at("seed").get<std::uint64_t>();
        if (t.contains("mode")) rc.train.mode = train_mode_from_string(t.at("mode").get<std::string>());
        if (t.contains("early_stop")) rc.train.early_stop = t.at("early_stop").get<bool>();
        if (t.contains("patience")) rc.train.patience = t.at("patience").get<std::size_t>();
        if (t.contains("s_dim")) rc.dims.s_dim = t.at("s_dim").get<std::size_t>();
        if (t.contains("v_dim")) rc.dims.v_dim = t.at("v_dim").get<std::size_t>();
        if (t.contains("hidden")) rc.dims.hidden = t.at("hidden").get<std::size_t>();
        rc.train.validate();
    }

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        detail::reject_unknown(e, {"n_pairs", "probe_seed", "a_distance_samples"}, "eval");
        if (e.contains("n_pairs")) rc.eval.n_pairs = e.at("n_pairs").get<std::size_t>();
        if (e.contains("probe_seed")) rc.eval.probe_seed = e.at("probe_seed").get<std::uint64_t>();
        if (e.contains("a_distance_samples"))
            rc.eval.a_distance_samples = e.at("a_distance_samples").get<std::size_t>();
    }

    if (j.contains("manipulate")) {
        const auto& m = j.at("manipulate");
        detail::reject_unknown(m, {"n_semantic", "n_variation", "steps", "seed"}, "manipulate");
        if (m.contains("n_semantic")) rc.manipulate.n_semantic = m.at("n_semantic").get<std::size_t>();
        if (m.contains("n_variation"))
            rc.manipulate.n_variation = m.at("n_variation").get<std::size_t>();
        if (m.contains("steps")) rc.manipulate.steps = m.at("steps").get<std::vector<double>>();
        if (m.contains("seed")) rc.manipulate.seed = m.at("seed").get<std::uint64_t>();
    }

    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("run config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("run config: invalid JSON in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

// resolved-config echo written next to every command's outputs
inline nlohmann::json run_config_to_json(const RunConfig& rc) {
    nlohmann::json dataset = {{"seed", rc.dataset.seed},
                              {"n_per_domain", rc.dataset.n_per_domain},
                              {"image_size", rc.dataset.image_size},
                              {"glyph_classes", rc.dataset.glyph_classes},
                              {"angles", rc.dataset.angles},
                              {"thickness_range", {rc.dataset.thickness_lo, rc.dataset.thickness_hi}},
                              {"jitter_px", rc.dataset.jitter_px}};
    nlohmann::json train = train_config_to_json(rc.train);
    // the run-config schema spells a pending auto margin as gamma="auto"
    train.erase("gamma_auto");
    if (rc.train.gamma_auto) train["gamma"] = "auto";
    train["s_dim"] = rc.dims.s_dim;
    train["v_dim"] = rc.dims.v_dim;
    train["hidden"] = rc.dims.hidden;
    nlohmann::json eval = {{"n_pairs", rc.eval.n_pairs},
                           {"probe_seed", rc.eval.probe_seed},
                           {"a_distance_samples", rc.eval.a_distance_samples}};
    nlohmann::json manipulate = {{"n_semantic", rc.manipulate.n_semantic},
                                 {"n_variation", rc.manipulate.n_variation},
                                 {"steps", rc.manipulate.steps},
                                 {"seed", rc.manipulate.seed}};
    return {{"dataset", dataset}, {"train", train}, {"eval", eval}, {"manipulate", manipulate}};
}

}  // namespace ddg
