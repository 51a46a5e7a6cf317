#pragma once

#include <map>
#include <string>
#include <vector>

#include "denim/attacks.hpp"
#include "denim/bundle.hpp"
#include "denim/defense.hpp"
#include "denim/pretrain.hpp"

namespace denim {

// Peak signal-to-noise ratio with peak 1, in decibels. Identical images map
// to +infinity.
struct PsnrResult {
    std::vector<double> per_image;
    double mean = 0.0;
};

PsnrResult psnr(const ImageBatch& a, const ImageBatch& b);

// Mean and population standard deviation of the per-image reconstruction
// loss at one noise level.
struct CurvePoint {
    double sigma = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

// Per-image loss of decode(encode(x + noise(sigma))) against clean x, for
// each sigma in the grid. Grid point g, chunk c draws from
// Rng(seed).child(g).child(c).
std::vector<CurvePoint> recon_loss_curve(ModelBundle& bundle, const ImageBatch& data,
                                         const std::vector<double>& sigma_grid, LossMetric metric,
                                         std::uint64_t seed);

// Clean and robust accuracy under the noise defense at one sigma.
struct TradeoffPoint {
    double sigma = 0.0;
    double clean_acc = 0.0;
    double robust_acc = 0.0;
};

// Sweeps sigma_de3 over the grid with eot_votes votes per prediction. Grid
// point i evaluates with eval seed Rng(eval_seed).child(i).seed() and
// attack seed Rng(attack.seed).child(i).seed(), so points are independent
// and individually reproducible.
std::vector<TradeoffPoint> tradeoff_sweep(ModelBundle& bundle, const std::vector<double>& sigma_grid,
                                          const AttackConfig& attack, const ImageBatch& data, int eot_votes,
                                          std::uint64_t eval_seed);

// An evaluated operating point for frontier extraction.
struct ParetoPoint {
    double clean_acc = 0.0;
    double robust_acc = 0.0;
    std::string label;

    bool operator==(const ParetoPoint&) const = default;
};

// Non-dominated subset (no other point is >= in both accuracies and > in
// one), sorted by clean accuracy ascending. Duplicates of a frontier point
// are all kept.
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

// Spearman rank correlation with average ranks on ties. Returns 0 when
// either ranking is constant.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Mean cosine distance between mean-pooled encoder features of clean and
// noise-degraded inputs. Bit-identical feature vectors count as distance 0.
double feature_invariance_probe(ModelBundle& bundle, const ImageBatch& data, double sigma, std::uint64_t seed);

// One evaluation run's results with enough context to reproduce every
// number: config hash, checkpoint hash, seeds, code version.
struct EvalReport {
    Provenance provenance;
    DefenseSpec defense;
    AttackConfig attack;
    double clean_accuracy = 0.0;
    std::map<std::string, double> robust_accuracy;
    std::map<std::string, double> psnr_db;
    std::vector<TradeoffPoint> tradeoff;
    std::vector<CurvePoint> recon_curve;
    std::uint64_t eval_seed = 0;
    std::string config_hash;
    std::string checkpoint_hash;
    std::string timestamp;
    std::string code_version;

    void validate() const;
};

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

void write_tradeoff_csv(const std::vector<TradeoffPoint>& curve, const std::string& path);
void write_recon_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

// Current time as a UTC ISO 8601 string.
std::string utc_timestamp();

}  // namespace denim
