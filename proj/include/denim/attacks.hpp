#pragma once

#include <functional>
#include <string>

#include "denim/bundle.hpp"
#include "denim/defense.hpp"
#include "denim/image.hpp"
#include "denim/rng.hpp"

namespace denim {

struct AttackError : Error {
    using Error::Error;
};

enum class AttackKind { FGSM, PGD, EoTPGD };

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from(const std::string& name);

// Untargeted L-inf attack settings. epsilon, step_size live in the [0,1]
// pixel domain. random_start applies to the multi-step attacks only; FGSM
// always starts from the input itself.
struct AttackConfig {
    AttackKind kind = AttackKind::PGD;
    double epsilon = 4.0 / 255.0;
    int steps = 10;
    double step_size = 2.0 / 255.0;
    int eot_samples = 10;
    bool random_start = true;
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;

    bool operator==(const AttackConfig&) const = default;
};

// Loss and input gradient of one forward pass of the attacked pipeline.
// Randomized pipelines draw fresh transformation noise from the rng on
// every call; deterministic ones ignore it.
struct AttackGrad {
    double loss = 0.0;
    Tensor grad;
};

using PipelineGradFn = std::function<AttackGrad(const ImageBatch&, Rng&)>;

// Cross-entropy loss and its input gradient through degrade -> reconstruct
// -> classify, one randomized defense instance per call. Inputs are assumed
// to lie in the pixel box already (the attacks' projections guarantee it),
// where the defense's entry clip is the identity. Parameter gradients
// touched along the way are zeroed again before returning, so the bundle
// stays clean for later training steps.
PipelineGradFn defended_grad_fn(ModelBundle& bundle, const DefenseSpec& defense);

// x + epsilon * sign(grad L), projected onto [0,1].
ImageBatch fgsm(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg);

// Iterated ascent with per-step projection onto the epsilon-ball around x
// and onto [0,1]; optional uniform random start inside the ball.
ImageBatch pgd(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg);

// PGD whose per-step gradient is averaged over eot_samples independent
// randomized passes.
ImageBatch eot_pgd(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg);

// Dispatch on cfg.kind.
ImageBatch run_attack(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg);

// Fraction of data classified correctly after attacking each chunk through
// the full defended pipeline. Attack randomness derives from attack.seed,
// evaluation randomness from eval_seed; the attacker never sees the
// evaluation stream.
double robust_accuracy(ModelBundle& bundle, const DefenseSpec& defense, const AttackConfig& attack,
                       const ImageBatch& data, std::uint64_t eval_seed);

}  // namespace denim
