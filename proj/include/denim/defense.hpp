#pragma once

#include <string>

#include "denim/bundle.hpp"
#include "denim/degradation.hpp"
#include "denim/image.hpp"
#include "denim/rng.hpp"

namespace denim {

// Test-time defense in front of the classifier. De3Noise floods the input
// with fresh Gaussian noise and routes it through the frozen
// encoder-decoder before classification; De3Mask does the same with random
// patch masking instead of noise. eot_votes independent randomized passes
// are averaged in logit space.
struct DefenseSpec {
    enum class Kind { None, De3Noise, De3Mask };

    Kind kind = Kind::None;
    double sigma_de3 = 70.0;  // 0-255 pixel units, like every other sigma
    double gamma_def = 0.75;  // fraction of patches masked per vote
    int eot_votes = 1;

    static DefenseSpec none();
    static DefenseSpec de3_noise(double sigma, int votes = 1);
    static DefenseSpec de3_mask(double gamma, int votes = 1);

    void validate() const;
    std::string describe() const;

    // True when prediction consumes random draws.
    bool randomized() const;

    bool operator==(const DefenseSpec&) const = default;
};

std::string defense_kind_name(DefenseSpec::Kind kind);
DefenseSpec::Kind defense_kind_from(const std::string& name);

// One randomized pass: clip the input to [0,1], degrade it according to the
// spec, reconstruct, classify. Returns logits (B, num_classes). The vote
// count in the spec is ignored here; callers that want averaging use
// defend_predict.
Tensor defend_vote(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& x, Rng& vote_rng);

// Defended prediction: the mean over eot_votes calls of defend_vote, vote v
// drawing from rng.child(v). The rng argument is never advanced, so two
// calls with the same rng are identical; callers evaluating several batches
// should hand each one its own child stream.
Tensor defend_predict(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& x, Rng& rng);

// Fraction of data classified correctly under the defense. Images are
// processed in fixed-size chunks, chunk i drawing from
// Rng(eval_seed).child(i).
double defended_accuracy(ModelBundle& bundle, const DefenseSpec& defense, const ImageBatch& data,
                         std::uint64_t eval_seed);

// Original / degraded / reconstructed triple for visual inspection.
// Degradation follows the same per-image sampling as pretraining.
struct ReconstructionTriple {
    ImageBatch original;
    ImageBatch degraded;
    ImageBatch reconstructed;
};

ReconstructionTriple reconstruct_triple(ModelBundle& bundle, const ImageBatch& x, const DegradationSpec& degradation,
                                        Rng& rng);

// Writes a PNG grid with one row per image and three columns
// (original | degraded | reconstructed), display values clipped to [0,1].
void write_reconstruction_grid(const ReconstructionTriple& triple, const std::string& path);

}  // namespace denim
