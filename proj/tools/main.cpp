#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "denim/artifact_io.hpp"
#include "denim/config.hpp"
#include "denim/evalbench.hpp"
#include "denim/plot.hpp"
#include "denim/serde.hpp"

using namespace denim;

namespace {

struct Options {
    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    std::string checkpoint;
    std::string from_dir;
    int epochs = 0;
    double epsilon = -1.0;  // 0-255 units
    double sigma = -1.0;    // 0-255 units
    int votes = 0;
    int count = 8;
};

bool flag_given(const CLI::App* a, const std::string& name) {
    const CLI::Option* o = a->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
}

ExperimentConfig effective_config(const CLI::App& app, const CLI::App* sub, const Options& opt) {
    ExperimentConfig cfg;
    if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
    if (flag_given(&app, "--output-dir")) cfg.output_dir = opt.output_dir;
    if (flag_given(&app, "--seed")) cfg.seed = opt.seed;
    if (flag_given(sub, "--epsilon")) cfg.attack.epsilon = opt.epsilon / 255.0;
    if (flag_given(sub, "--sigma") && sub->get_name() != "probe")
        cfg.defense = DefenseSpec::de3_noise(opt.sigma, std::max(cfg.defense.eot_votes, 1));
    if (flag_given(sub, "--votes")) cfg.defense.eot_votes = opt.votes;
    cfg.validate();
    return cfg;
}

Provenance base_provenance(const ExperimentConfig& cfg, const std::string& stage) {
    return {{"stage", stage},
            {"config_hash", config_hash(cfg)},
            {"global_seed", std::to_string(cfg.seed)},
            {"code_version", kVersion}};
}

void snapshot_config(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    save_config(cfg, out / "config.json");
}

ModelBundle load_stage_bundle(const Options& opt, const ExperimentConfig& cfg, const char* fallback_stage) {
    std::filesystem::path path = opt.checkpoint;
    if (path.empty()) path = std::filesystem::path(cfg.output_dir) / fallback_stage / "final.ckpt";
    if (!std::filesystem::exists(path))
        throw IoError("no checkpoint at " + path.string() + "; pass --checkpoint or run the earlier stage first");
    return load_bundle(path);
}

EvalReport base_report(const ExperimentConfig& cfg, const ModelBundle& bundle) {
    EvalReport r;
    r.provenance = bundle.provenance;
    r.defense = cfg.defense;
    r.attack = cfg.attack;
    r.eval_seed = cfg.seed;
    r.config_hash = config_hash(cfg);
    r.timestamp = utc_timestamp();
    r.code_version = kVersion;
    return r;
}

int cmd_pretrain(const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    snapshot_config(cfg, out);
    Dataset data = load_dataset(cfg.dataset);
    PretrainConfig pre = cfg.pretrain;
    pre.dataset_name = cfg.dataset.name;

    ModelBundle bundle = make_bundle(cfg.arch, cfg.seed);
    bundle.provenance = base_provenance(cfg, "pretrain");
    const PretrainReport rep = pretrain_run(bundle, data.train, pre, out / "pretrain");
    std::printf("pretrained %d epochs on %lld images, loss %.5f -> %.5f\n", pre.epochs,
                static_cast<long long>(data.train.count()), rep.epoch_losses.front(), rep.epoch_losses.back());
    std::printf("checkpoint: %s\n", rep.final_checkpoint.string().c_str());
    return 0;
}

int cmd_finetune(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    snapshot_config(cfg, out);
    Dataset data = load_dataset(cfg.dataset);
    FinetuneConfig ft = cfg.finetune;
    ft.dataset_name = cfg.dataset.name;

    ModelBundle bundle = load_stage_bundle(opt, cfg, "pretrain");
    for (const auto& [k, v] : base_provenance(cfg, "finetune")) bundle.provenance[k] = v;
    const FinetuneReport rep = finetune_run(bundle, data.train, ft, out / "finetune");

    const double test_acc = defended_accuracy(bundle, DefenseSpec::none(), data.test, cfg.seed);
    std::printf("fine-tuned %d epochs: train acc %.4f, test acc %.4f\n", ft.epochs, rep.epoch_accuracies.back(),
                test_acc);
    std::printf("checkpoint: %s\n", rep.final_checkpoint.string().c_str());
    return 0;
}

int cmd_attack(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    Dataset data = load_dataset(cfg.dataset);
    ModelBundle bundle = load_stage_bundle(opt, cfg, "finetune");

    EvalReport report = base_report(cfg, bundle);
    report.clean_accuracy = defended_accuracy(bundle, cfg.defense, data.test, cfg.seed);
    const double robust = robust_accuracy(bundle, cfg.defense, cfg.attack, data.test, cfg.seed);
    report.robust_accuracy[cfg.attack.describe()] = robust;
    save_report(report, (out / "attack" / "report.json").string());

    std::printf("defense %s\n", cfg.defense.describe().c_str());
    std::printf("clean accuracy  %.4f\n", report.clean_accuracy);
    std::printf("robust accuracy %.4f under %s\n", robust, cfg.attack.describe().c_str());
    return 0;
}

int cmd_sweep(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    Dataset data = load_dataset(cfg.dataset);
    ModelBundle bundle = load_stage_bundle(opt, cfg, "finetune");

    std::vector<double> grid;
    for (double s = 0.0; s <= 160.0; s += 20.0) grid.push_back(s);
    const int votes = std::max(cfg.defense.eot_votes, 1);
    const auto curve = tradeoff_sweep(bundle, grid, cfg.attack, data.test, votes, cfg.seed);

    EvalReport report = base_report(cfg, bundle);
    report.tradeoff = curve;
    save_report(report, (out / "sweep" / "sweep.json").string());
    write_tradeoff_csv(curve, (out / "sweep" / "tradeoff.csv").string());

    PlotSeries clean{"clean", {}, false}, robust{"robust", {}, false};
    for (const auto& p : curve) {
        clean.points.emplace_back(p.sigma, p.clean_acc);
        robust.points.emplace_back(p.sigma, p.robust_acc);
        std::printf("sigma %6.1f  clean %.4f  robust %.4f\n", p.sigma, p.clean_acc, p.robust_acc);
    }
    write_plot_png({clean, robust}, "accuracy vs defense strength", "sigma", "accuracy",
                   (out / "sweep" / "tradeoff.png").string());
    return 0;
}

int cmd_report(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    const std::filesystem::path from = opt.from_dir.empty() ? out : std::filesystem::path(opt.from_dir);
    if (!std::filesystem::is_directory(from)) throw IoError("report source " + from.string() + " is not a directory");

    std::vector<ParetoPoint> points;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(from)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        if (entry.path().filename() == "config.json" || entry.path().filename() == "pareto.json") continue;
        EvalReport r;
        try {
            r = load_report(entry.path().string());
        } catch (const Error&) {
            continue;
        }
        for (const auto& p : r.tradeoff)
            points.push_back({p.clean_acc, p.robust_acc, "sigma=" + CsvWriter::format_cell(p.sigma)});
        for (const auto& [name, acc] : r.robust_accuracy) points.push_back({r.clean_accuracy, acc, name});
    }
    if (points.empty()) throw IoError("no evaluation reports under " + from.string());

    const auto frontier = pareto_frontier(points);
    json j;
    j["points"] = json::array();
    for (const auto& p : points) j["points"].push_back({{"clean_acc", p.clean_acc}, {"robust_acc", p.robust_acc}, {"label", p.label}});
    j["frontier"] = json::array();
    for (const auto& p : frontier) j["frontier"].push_back({{"clean_acc", p.clean_acc}, {"robust_acc", p.robust_acc}, {"label", p.label}});
    j["config_hash"] = config_hash(cfg);
    j["code_version"] = kVersion;
    j["seed"] = cfg.seed;
    j["timestamp"] = utc_timestamp();
    write_json_file(out / "report" / "pareto.json", j);

    PlotSeries all{"operating points", {}, true};
    for (const auto& p : points) all.points.emplace_back(p.clean_acc, p.robust_acc);
    PlotSeries front{"frontier", {}, false};
    for (const auto& p : frontier) front.points.emplace_back(p.clean_acc, p.robust_acc);
    write_plot_png({all, front}, "robustness trade-off", "clean accuracy", "robust accuracy",
                   (out / "report" / "pareto.png").string());

    std::printf("%zu points, %zu on the frontier\n", points.size(), frontier.size());
    for (const auto& p : frontier) std::printf("  clean %.4f robust %.4f  %s\n", p.clean_acc, p.robust_acc, p.label.c_str());
    return 0;
}

int cmd_reconstruct(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    Dataset data = load_dataset(cfg.dataset);
    ModelBundle bundle = load_stage_bundle(opt, cfg, "pretrain");

    const std::int64_t n = std::min<std::int64_t>(opt.count, data.test.count());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const ImageBatch sample = data.test.select(idx);

    Rng rng(cfg.seed);
    const ReconstructionTriple triple = reconstruct_triple(bundle, sample, cfg.pretrain.degradation, rng);
    std::filesystem::create_directories(out / "reconstruct");
    write_reconstruction_grid(triple, (out / "reconstruct" / "grid.png").string());

    const PsnrResult quality = psnr(triple.reconstructed, triple.original);
    json j{{"degradation", json(cfg.pretrain.degradation)},
           {"psnr_db", quality.mean},
           {"config_hash", config_hash(cfg)},
           {"seed", cfg.seed},
           {"code_version", kVersion},
           {"timestamp", utc_timestamp()}};
    write_json_file(out / "reconstruct" / "psnr.json", j);

    std::printf("reconstruction PSNR %.2f dB over %lld images\n", quality.mean, static_cast<long long>(n));
    std::printf("grid: %s\n", (out / "reconstruct" / "grid.png").string().c_str());
    return 0;
}

int cmd_probe(const Options& opt, const ExperimentConfig& cfg) {
    const std::filesystem::path out = cfg.output_dir;
    Dataset data = load_dataset(cfg.dataset);
    ModelBundle bundle = load_stage_bundle(opt, cfg, "pretrain");

    const double sigma = opt.sigma >= 0.0 ? opt.sigma : 75.0;
    const double distance = feature_invariance_probe(bundle, data.test, sigma, cfg.seed);
    json j{{"sigma", sigma},
           {"cosine_distance", distance},
           {"config_hash", config_hash(cfg)},
           {"seed", cfg.seed},
           {"code_version", kVersion},
           {"timestamp", utc_timestamp()}};
    write_json_file(out / "probe" / "probe.json", j);

    std::printf("feature cosine distance at sigma %.1f: %.6f\n", sigma, distance);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisy image modeling and denoise-by-decoder defense workbench"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opt;
    app.add_option("--config", opt.config_path, "experiment config file (json)");
    app.add_option("--output-dir", opt.output_dir, "artifact directory, overrides the config");
    app.add_option("--seed", opt.seed, "global seed, overrides the config");

    CLI::App* pre = app.add_subcommand("pretrain", "train encoder and decoder on the degradation pretext");
    CLI::App* ft = app.add_subcommand("finetune", "attach and train a classifier on a pretrained checkpoint");
    CLI::App* atk = app.add_subcommand("attack", "evaluate clean and adversarial accuracy");
    CLI::App* swp = app.add_subcommand("sweep", "trade-off curve over defense strength");
    CLI::App* rpt = app.add_subcommand("report", "aggregate evaluation artifacts into a Pareto view");
    CLI::App* rec = app.add_subcommand("reconstruct", "render a degraded/reconstructed image grid");
    CLI::App* prb = app.add_subcommand("probe", "feature invariance to noise");

    for (CLI::App* sub : {ft, atk, swp, rec, prb})
        sub->add_option("--checkpoint", opt.checkpoint, "model checkpoint to load");
    atk->add_option("--epsilon", opt.epsilon, "attack budget in 0-255 units");
    for (CLI::App* sub : {atk, swp}) sub->add_option("--votes", opt.votes, "defense votes per prediction");
    atk->add_option("--sigma", opt.sigma, "defense noise scale in 0-255 units");
    prb->add_option("--sigma", opt.sigma, "probe noise scale in 0-255 units");
    rpt->add_option("--from", opt.from_dir, "directory to scan for evaluation reports");
    rec->add_option("--count", opt.count, "images in the grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const ExperimentConfig cfg = effective_config(app, sub, opt);
        if (sub == pre) return cmd_pretrain(cfg);
        if (sub == ft) return cmd_finetune(opt, cfg);
        if (sub == atk) return cmd_attack(opt, cfg);
        if (sub == swp) return cmd_sweep(opt, cfg);
        if (sub == rpt) return cmd_report(opt, cfg);
        if (sub == rec) return cmd_reconstruct(opt, cfg);
        return cmd_probe(opt, cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
