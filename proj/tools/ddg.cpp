// ddg: command-line surface tying dataset generation, training, evaluation,
// latent manipulation and run aggregation together.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddg/ddg.hpp"

namespace fs = std::filesystem;
using namespace ddg;

namespace {

void write_config_echo(const RunConfig& rc, const std::string& dir) {
    std::ofstream out(dir + "/config.json");
    if (!out) throw IoError("cannot write config echo in " + dir);
    out << run_config_to_json(rc).dump(2) << '\n';
}

Dataset domain_subset(const Dataset& ds, std::size_t domain_id, bool keep) {
    Dataset out;
    out.domains = ds.domains;
    for (const auto& ex : ds.examples)
        if ((ex.domain_id == domain_id) == keep) out.examples.push_back(ex);
    return out;
}

struct LeaveOneOut {
    Dataset train;    // 80% of every source domain
    Dataset sources;  // 20% eval split of every source domain
    Dataset holdout;  // the held-out domain, untouched
};

LeaveOneOut leave_one_domain_out(const Dataset& ds, std::size_t holdout_domain,
                                 std::uint64_t seed) {
    if (holdout_domain >= ds.domains.size())
        throw ConfigError("holdout domain " + std::to_string(holdout_domain) + " out of range");
    LeaveOneOut out;
    out.holdout = domain_subset(ds, holdout_domain, true);
    Dataset sources_all = domain_subset(ds, holdout_domain, false);
    if (out.holdout.examples.empty() || sources_all.examples.empty())
        throw ConfigError("leave-one-domain-out requires a nonempty holdout and sources");
    auto [train, eval] = split(sources_all, 0.8, seed);
    out.train = std::move(train);
    out.sources = std::move(eval);
    return out;
}

std::string mode_tag(const TrainConfig& c) {
    if (c.mode == TrainMode::erm) return "erm";
    return c.augment ? "ddg_aug" : "ddg";
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    Dataset ds = generate_glyphs(rc.dataset);
    export_dataset(ds, out_dir);
    write_config_echo(rc, out_dir);
    std::cout << "wrote " << ds.size() << " examples across " << ds.domains.size()
              << " domains to " << out_dir << '\n';
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              std::size_t holdout_domain, const std::string& out_dir) {
    RunConfig rc = load_run_config(config_path);
    Dataset ds = import_dataset(data_dir);
    if (ds.examples[0].image.dim(0) != rc.dims.image_h)
        throw ConfigError("dataset image size does not match config image_size");
    LeaveOneOut loo = leave_one_domain_out(ds, holdout_domain, rc.train.seed);

    ModelBundle model(rc.dims, rc.train.seed);
    Trainer trainer(model, rc.train);
    // per-epoch val_acc comes from the held-out domain (test-domain validation)
    auto log = trainer.train(loo.train, loo.holdout);

    fs::create_directories(out_dir);
    write_metrics_csv(log, out_dir + "/metrics.csv");

    Checkpoint ckpt;
    ckpt.config = trainer.config();  // gamma resolved by now
    ckpt.dims = rc.dims;
    ckpt.lambda = trainer.dual().lambda;
    ckpt.step = log.empty() ? 0 : log.back().step;
    ckpt.model = model;
    save_checkpoint(ckpt, out_dir + "/checkpoint.ddgc");

    rc.train = trainer.config();
    write_config_echo(rc, out_dir);
    std::cout << "trained " << mode_tag(rc.train) << " for " << log.size()
              << " steps; resolved gamma=" << fmt_double(trainer.config().gamma) << '\n';
    return 0;
}

constexpr const char* kLedgerHeader =
    "run_id,mode,seed,holdout,avg_acc,worst_acc,a_dist_raw,a_dist_sem,sat_rate";

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             std::size_t holdout_domain, const std::string& out_dir, const EvalConfig& ec) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Dataset ds = import_dataset(data_dir);
    LeaveOneOut loo = leave_one_domain_out(ds, holdout_domain, ckpt.config.seed);

    EvalReport report;
    std::map<std::size_t, Dataset> per_domain;
    for (std::size_t d = 0; d < ds.domains.size(); ++d) {
        per_domain[d] = d == holdout_domain ? domain_subset(loo.holdout, d, true)
                                            : domain_subset(loo.sources, d, true);
    }
    double acc_sum = 0.0;
    for (auto& [d, dom_ds] : per_domain) {
        report.per_domain_acc[d] = accuracy(ckpt.model, dom_ds);
        acc_sum += report.per_domain_acc[d];
    }
    report.avg_acc = acc_sum / static_cast<double>(per_domain.size());
    auto [worst, worst_acc] = worst_domain_accuracy(ckpt.model, per_domain);
    report.worst_domain = worst;
    report.worst_domain_acc = worst_acc;

    // source mixture vs holdout, deterministically subsampled
    auto collect = [&](const Dataset& d, std::uint64_t stream) {
        std::vector<std::size_t> idx(d.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        auto rng = make_rng(ec.probe_seed, stream);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(idx.size(), ec.a_distance_samples));
        std::vector<Tensor> raw, sem;
        for (std::size_t i : idx) {
            raw.push_back(flattened(d.examples[i].image));
            sem.push_back(ckpt.model.encode_semantic(d.examples[i].image).values);
        }
        return std::make_pair(raw, sem);
    };
    auto [src_raw, src_sem] = collect(loo.sources, 1);
    auto [hold_raw, hold_sem] = collect(loo.holdout, 2);
    report.a_distance_raw = a_distance(src_raw, hold_raw, ec.probe_seed);
    report.a_distance_semantic = a_distance(src_sem, hold_sem, ec.probe_seed);

    report.constraint_sat_rate = constraint_satisfaction_rate(
        ckpt.model, loo.sources, ckpt.config.gamma, ec.n_pairs, ec.probe_seed);
    report.mean_l1_recon =
        mean_l1_reconstruction(ckpt.model, loo.sources, ec.n_pairs, ec.probe_seed);

    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/report.txt");
        if (!out) throw IoError("cannot write report in " + out_dir);
        write_report(report, out);
        out << "holdout_domain=" << holdout_domain << '\n';
        out << "holdout_acc=" << fmt_double(report.per_domain_acc.at(holdout_domain)) << '\n';
        out << "gamma=" << fmt_double(ckpt.config.gamma) << '\n';
    }
    {
        const std::string run_id = fs::path(out_dir).filename().string();
        std::ofstream out(out_dir + "/result.csv");
        if (!out) throw IoError("cannot write result ledger in " + out_dir);
        out << kLedgerHeader << '\n'
            << run_id << ',' << mode_tag(ckpt.config) << ',' << ckpt.config.seed << ','
            << holdout_domain << ',' << fmt_double(report.avg_acc) << ','
            << fmt_double(report.worst_domain_acc) << ',' << fmt_double(report.a_distance_raw)
            << ',' << fmt_double(report.a_distance_semantic) << ','
            << fmt_double(report.constraint_sat_rate) << '\n';
    }
    std::cout << "holdout acc " << report.per_domain_acc.at(holdout_domain) << ", worst "
              << report.worst_domain_acc << " (domain " << report.worst_domain << ")\n";
    return 0;
}

int cmd_manipulate(const std::string& checkpoint_path, const std::string& data_dir,
                   const std::string& mode, const std::string& out_dir,
                   const ManipulateConfig& mc) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Dataset ds = import_dataset(data_dir);
    if (ds.size() < 2) throw ConfigError("manipulate: dataset too small");

    auto pick = [&](std::size_t n, std::uint64_t stream) {
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        auto rng = make_rng(mc.seed, stream);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(n, idx.size()));
        std::vector<Tensor> out;
        for (std::size_t i : idx) out.push_back(ds.examples[i].image);
        return out;
    };

    fs::create_directories(out_dir);
    auto name = [&](const std::string& tag, std::size_t step) {
        return out_dir + "/" + tag + "_" + std::to_string(mc.seed) + "_" +
               std::to_string(step) + ".pgm";
    };

    if (mode == "swap") {
        auto sems = pick(mc.n_semantic, 1);
        auto vars = pick(mc.n_variation, 2);
        export_grid(swap_grid(ckpt.model, sems, vars), name("swap", 0));
    } else if (mode == "interp-v" || mode == "interp-s") {
        auto xs = pick(2, 3);
        auto images = mode == "interp-v"
                          ? interpolate_variation(ckpt.model, xs[0], xs[1], mc.steps)
                          : interpolate_semantic(ckpt.model, xs[0], xs[1], mc.steps);
        const std::string tag = mode == "interp-v" ? "interp-v" : "interp-s";
        for (std::size_t k = 0; k < images.size(); ++k) write_pgm(images[k], name(tag, k));
        export_grid(ImageGrid{images}, out_dir + "/" + tag + "_" + std::to_string(mc.seed) +
                                           "_grid.pgm");
    } else {
        throw ConfigError("manipulate: mode must be swap, interp-v or interp-s");
    }
    std::cout << "wrote " << mode << " output to " << out_dir << '\n';
    return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_path) {
    struct Row {
        std::string mode;
        std::size_t holdout;
        double avg_acc, worst_acc;
    };
    std::vector<Row> rows;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "result.csv"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        std::ifstream in(dir / "result.csv");
        std::string line;
        if (!std::getline(in, line) || line != kLedgerHeader)
            throw FormatError("report: bad ledger header in " + dir.string());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::istringstream row(line);
            std::string field;
            while (std::getline(row, field, ',')) f.push_back(field);
            if (f.size() != 9) throw FormatError("report: short ledger row in " + dir.string());
            rows.push_back({f[1], std::stoul(f[3]), std::stod(f[4]), std::stod(f[5])});
        }
    }
    if (rows.empty()) throw ConfigError("report: no result.csv found under " + runs_dir);

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::map<std::pair<std::string, std::size_t>, std::vector<Row>> groups;
    for (const auto& r : rows) groups[{r.mode, r.holdout}].push_back(r);

    std::ofstream out(out_path);
    if (!out) throw IoError("report: cannot write " + out_path);
    out << "mode,holdout,runs,median_avg_acc,median_worst_acc\n";
    for (const auto& [key, g] : groups) {
        std::vector<double> avgs, worsts;
        for (const auto& r : g) {
            avgs.push_back(r.avg_acc);
            worsts.push_back(r.worst_acc);
        }
        out << key.first << ',' << key.second << ',' << g.size() << ','
            << fmt_double(median(avgs)) << ',' << fmt_double(median(worsts)) << '\n';
    }
    std::cout << "aggregated " << rows.size() << " runs into " << out_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disentanglement-constrained domain generalization lab"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, checkpoint_path, mode, runs_dir;
    std::size_t holdout_domain = 0;

    auto* gen = app.add_subcommand("gen-data", "materialize a synthetic dataset directory");
    gen->add_option("--config", config_path, "run config JSON")->required();
    gen->add_option("--out", out_path, "output dataset directory")->required();

    auto* train = app.add_subcommand("train", "leave-one-domain-out training");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--holdout-domain", holdout_domain, "domain id held out")->required();
    train->add_option("--out", out_path, "run output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--holdout-domain", holdout_domain, "domain id held out")->required();
    eval->add_option("--out", out_path, "run output directory")->required();
    eval->add_option("--config", config_path, "run config JSON (eval section)");

    auto* man = app.add_subcommand("manipulate", "latent swap / interpolation grids");
    man->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    man->add_option("--data", data_dir, "dataset directory")->required();
    man->add_option("--mode", mode, "swap | interp-v | interp-s")->required();
    man->add_option("--out", out_path, "output directory")->required();
    man->add_option("--config", config_path, "run config JSON (manipulate section)");

    auto* rep = app.add_subcommand("report", "aggregate run ledgers into a comparison table");
    rep->add_option("--runs", runs_dir, "directory of run directories")->required();
    rep->add_option("--out", out_path, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_path);
        if (train->parsed()) return cmd_train(config_path, data_dir, holdout_domain, out_path);
        if (eval->parsed()) {
            EvalConfig ec;
            if (!config_path.empty()) ec = load_run_config(config_path).eval;
            return cmd_eval(checkpoint_path, data_dir, holdout_domain, out_path, ec);
        }
        if (man->parsed()) {
            ManipulateConfig mc;
            if (!config_path.empty()) mc = load_run_config(config_path).manipulate;
            return cmd_manipulate(checkpoint_path, data_dir, mode, out_path, mc);
        }
        if (rep->parsed()) return cmd_report(runs_dir, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error kind=config msg=\"" << e.what() << "\"\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error kind=numeric msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error kind=data msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error kind=data msg=\"" << e.what() << "\"\n";
        return 2;
    }
    return 0;
}
