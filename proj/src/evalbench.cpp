#include "denim/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ctime>
#include <limits>
#include <numeric>

#include "denim/artifact_io.hpp"
#include "denim/serde.hpp"

namespace denim {

PsnrResult psnr(const ImageBatch& a, const ImageBatch& b) {
    if (a.count() != b.count() || a.height() != b.height() || a.width() != b.width() ||
        a.channels() != b.channels())
        throw ArgError("psnr: image batches have different shapes");
    if (a.count() == 0) throw ArgError("psnr: empty batch");
    PsnrResult r;
    r.per_image.reserve(static_cast<std::size_t>(a.count()));
    const std::int64_t n = a.pixels_per_image();
    double mean_acc = 0.0;
    for (std::int64_t i = 0; i < a.count(); ++i) {
        const float* pa = a.image_data(i);
        const float* pb = b.image_data(i);
        double mse = 0.0;
        for (std::int64_t k = 0; k < n; ++k) {
            const double d = static_cast<double>(pa[k]) - static_cast<double>(pb[k]);
            mse += d * d;
        }
        mse /= static_cast<double>(n);
        const double db = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
        r.per_image.push_back(db);
        mean_acc += db;
    }
    r.mean = mean_acc / static_cast<double>(a.count());
    return r;
}

namespace {

constexpr std::int64_t kEvalChunk = 128;

std::vector<std::int64_t> chunk_indices(std::int64_t start, std::int64_t stop) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    return idx;
}

double per_image_loss(const Tensor& recon, const ImageBatch& clean, std::int64_t image, LossMetric metric) {
    const std::int64_t n = clean.pixels_per_image();
    const float* r = recon.data() + image * n;
    const float* x = clean.image_data(image);
    double acc = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double d = static_cast<double>(r[k]) - static_cast<double>(x[k]);
        acc += metric == LossMetric::L2 ? d * d : std::abs(d);
    }
    return acc / static_cast<double>(n);
}

}  // namespace

std::vector<CurvePoint> recon_loss_curve(ModelBundle& bundle, const ImageBatch& data,
                                         const std::vector<double>& sigma_grid, LossMetric metric,
                                         std::uint64_t seed) {
    if (sigma_grid.empty()) throw ArgError("recon_loss_curve: empty sigma grid");
    if (data.count() == 0) throw ArgError("recon_loss_curve: empty dataset");
    const Rng root(seed);
    std::vector<CurvePoint> curve;
    curve.reserve(sigma_grid.size());
    for (std::size_t g = 0; g < sigma_grid.size(); ++g) {
        const double sigma = sigma_grid[g];
        if (sigma < 0.0) throw ArgError("recon_loss_curve: negative sigma in grid");
        const Rng grid_rng = root.child(g);
        std::vector<double> losses;
        losses.reserve(static_cast<std::size_t>(data.count()));
        for (std::int64_t start = 0, chunk = 0; start < data.count(); start += kEvalChunk, ++chunk) {
            const std::int64_t stop = std::min(start + kEvalChunk, data.count());
            ImageBatch part = data.select(chunk_indices(start, stop));
            Rng chunk_rng = grid_rng.child(static_cast<std::uint64_t>(chunk));
            ImageBatch noisy = part;
            for (std::int64_t i = 0; i < noisy.count(); ++i) add_noise_inplace(noisy, i, sigma, chunk_rng);
            const Tensor recon = bundle.decoder.forward(bundle.encoder.forward(noisy));
            for (std::int64_t i = 0; i < part.count(); ++i) losses.push_back(per_image_loss(recon, part, i, metric));
        }
        CurvePoint p;
        p.sigma = sigma;
        for (double v : losses) p.mean += v;
        p.mean /= static_cast<double>(losses.size());
        double var = 0.0;
        for (double v : losses) var += (v - p.mean) * (v - p.mean);
        p.stddev = std::sqrt(var / static_cast<double>(losses.size()));
        curve.push_back(p);
    }
    return curve;
}

std::vector<TradeoffPoint> tradeoff_sweep(ModelBundle& bundle, const std::vector<double>& sigma_grid,
                                          const AttackConfig& attack, const ImageBatch& data, int eot_votes,
                                          std::uint64_t eval_seed) {
    if (sigma_grid.empty()) throw ArgError("tradeoff_sweep: empty sigma grid");
    const Rng eval_root(eval_seed);
    const Rng attack_root(attack.seed);
    std::vector<TradeoffPoint> curve;
    curve.reserve(sigma_grid.size());
    for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
        const DefenseSpec defense = DefenseSpec::de3_noise(sigma_grid[i], eot_votes);
        const std::uint64_t point_seed = eval_root.child(i).seed();
        AttackConfig point_attack = attack;
        point_attack.seed = attack_root.child(i).seed();
        TradeoffPoint p;
        p.sigma = sigma_grid[i];
        p.clean_acc = defended_accuracy(bundle, defense, data, point_seed);
        p.robust_acc = robust_accuracy(bundle, defense, point_attack, data, point_seed);
        curve.push_back(p);
    }
    return curve;
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].clean_acc != points[b].clean_acc) return points[a].clean_acc > points[b].clean_acc;
        return points[a].robust_acc > points[b].robust_acc;
    });
    std::vector<ParetoPoint> kept;
    double best_robust = -std::numeric_limits<double>::infinity();
    double kept_clean = 0.0, kept_robust = 0.0;
    for (std::size_t idx : order) {
        const ParetoPoint& p = points[idx];
        const bool duplicate_of_frontier = !kept.empty() && p.clean_acc == kept_clean && p.robust_acc == kept_robust;
        if (p.robust_acc > best_robust || duplicate_of_frontier) {
            kept.push_back(p);
            best_robust = std::max(best_robust, p.robust_acc);
            kept_clean = p.clean_acc;
            kept_robust = p.robust_acc;
        }
    }
    std::sort(kept.begin(), kept.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        if (a.clean_acc != b.clean_acc) return a.clean_acc < b.clean_acc;
        if (a.robust_acc != b.robust_acc) return a.robust_acc < b.robust_acc;
        return a.label < b.label;
    });
    return kept;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgError("spearman: length mismatch");
    if (xs.size() < 2) throw ArgError("spearman: need at least two points");
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

double feature_invariance_probe(ModelBundle& bundle, const ImageBatch& data, double sigma, std::uint64_t seed) {
    if (data.count() == 0) throw ArgError("feature_invariance_probe: empty dataset");
    const Rng root(seed);
    const std::int64_t d_model = bundle.arch.embed_dim;
    double total = 0.0;
    for (std::int64_t start = 0, chunk = 0; start < data.count(); start += kEvalChunk, ++chunk) {
        const std::int64_t stop = std::min(start + kEvalChunk, data.count());
        ImageBatch part = data.select(chunk_indices(start, stop));
        Rng chunk_rng = root.child(static_cast<std::uint64_t>(chunk));
        const ImageBatch noisy = add_noise(part, sigma, chunk_rng);
        const Tensor clean_tokens = bundle.encoder.forward(part);
        const Tensor noisy_tokens = bundle.encoder.forward(noisy);
        const std::int64_t tokens = clean_tokens.size() / (part.count() * d_model);
        for (std::int64_t i = 0; i < part.count(); ++i) {
            std::vector<double> a(static_cast<std::size_t>(d_model), 0.0);
            std::vector<double> b(static_cast<std::size_t>(d_model), 0.0);
            const float* ca = clean_tokens.data() + i * tokens * d_model;
            const float* cb = noisy_tokens.data() + i * tokens * d_model;
            for (std::int64_t t = 0; t < tokens; ++t)
                for (std::int64_t d = 0; d < d_model; ++d) {
                    a[static_cast<std::size_t>(d)] += ca[t * d_model + d];
                    b[static_cast<std::size_t>(d)] += cb[t * d_model + d];
                }
            if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0) continue;
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::int64_t d = 0; d < d_model; ++d) {
                dot += a[static_cast<std::size_t>(d)] * b[static_cast<std::size_t>(d)];
                na += a[static_cast<std::size_t>(d)] * a[static_cast<std::size_t>(d)];
                nb += b[static_cast<std::size_t>(d)] * b[static_cast<std::size_t>(d)];
            }
            if (na == 0.0 || nb == 0.0) {
                total += 1.0;
                continue;
            }
            const double cos = std::min(1.0, dot / std::sqrt(na * nb));
            total += 1.0 - cos;
        }
    }
    return total / static_cast<double>(data.count());
}

void EvalReport::validate() const {
    if (!(clean_accuracy >= 0.0 && clean_accuracy <= 1.0)) throw ConfigError("report.clean_accuracy outside [0, 1]");
    for (const auto& [name, acc] : robust_accuracy)
        if (!(acc >= 0.0 && acc <= 1.0)) throw ConfigError("report.robust_accuracy[" + name + "] outside [0, 1]");
    for (const auto& p : tradeoff)
        if (!(p.clean_acc >= 0.0 && p.clean_acc <= 1.0 && p.robust_acc >= 0.0 && p.robust_acc <= 1.0))
            throw ConfigError("report.tradeoff accuracies outside [0, 1]");
    defense.validate();
    attack.validate();
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void save_report(const EvalReport& report, const std::string& path) {
    report.validate();
    json j;
    j["provenance"] = report.provenance;
    j["defense"] = report.defense;
    j["attack"] = report.attack;
    j["clean_accuracy"] = report.clean_accuracy;
    j["robust_accuracy"] = report.robust_accuracy;
    j["psnr_db"] = report.psnr_db;
    json tr = json::array();
    for (const auto& p : report.tradeoff)
        tr.push_back(json{{"sigma", p.sigma}, {"clean_acc", p.clean_acc}, {"robust_acc", p.robust_acc}});
    j["tradeoff"] = tr;
    json rc = json::array();
    for (const auto& p : report.recon_curve)
        rc.push_back(json{{"sigma", p.sigma}, {"mean", p.mean}, {"stddev", p.stddev}});
    j["recon_curve"] = rc;
    j["eval_seed"] = report.eval_seed;
    j["config_hash"] = report.config_hash;
    j["checkpoint_hash"] = report.checkpoint_hash;
    j["timestamp"] = report.timestamp;
    j["code_version"] = report.code_version;
    write_json_file(path, j);
}

EvalReport load_report(const std::string& path) {
    const json j = read_json_file(path);
    check_known_keys(j, "report",
                     {"provenance", "defense", "attack", "clean_accuracy", "robust_accuracy", "psnr_db", "tradeoff",
                      "recon_curve", "eval_seed", "config_hash", "checkpoint_hash", "timestamp", "code_version"});
    EvalReport r;
    if (j.contains("provenance")) j.at("provenance").get_to(r.provenance);
    if (j.contains("defense")) j.at("defense").get_to(r.defense);
    if (j.contains("attack")) j.at("attack").get_to(r.attack);
    read_opt(j, "clean_accuracy", r.clean_accuracy);
    if (j.contains("robust_accuracy")) j.at("robust_accuracy").get_to(r.robust_accuracy);
    if (j.contains("psnr_db")) j.at("psnr_db").get_to(r.psnr_db);
    if (j.contains("tradeoff")) {
        for (const auto& e : j.at("tradeoff")) {
            check_known_keys(e, "report.tradeoff", {"sigma", "clean_acc", "robust_acc"});
            TradeoffPoint p;
            e.at("sigma").get_to(p.sigma);
            e.at("clean_acc").get_to(p.clean_acc);
            e.at("robust_acc").get_to(p.robust_acc);
            r.tradeoff.push_back(p);
        }
    }
    if (j.contains("recon_curve")) {
        for (const auto& e : j.at("recon_curve")) {
            check_known_keys(e, "report.recon_curve", {"sigma", "mean", "stddev"});
            CurvePoint p;
            e.at("sigma").get_to(p.sigma);
            e.at("mean").get_to(p.mean);
            e.at("stddev").get_to(p.stddev);
            r.recon_curve.push_back(p);
        }
    }
    read_opt(j, "eval_seed", r.eval_seed);
    read_opt(j, "config_hash", r.config_hash);
    read_opt(j, "checkpoint_hash", r.checkpoint_hash);
    read_opt(j, "timestamp", r.timestamp);
    read_opt(j, "code_version", r.code_version);
    r.validate();
    return r;
}

void write_tradeoff_csv(const std::vector<TradeoffPoint>& curve, const std::string& path) {
    CsvWriter csv(path, {"sigma", "clean_acc", "robust_acc"});
    for (const auto& p : curve) csv.row({p.sigma, p.clean_acc, p.robust_acc});
}

void write_recon_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
    CsvWriter csv(path, {"sigma", "mean", "stddev"});
    for (const auto& p : curve) csv.row({p.sigma, p.mean, p.stddev});
}

}  // namespace denim
