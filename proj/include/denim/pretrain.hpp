#pragma once

#include <filesystem>
#include <vector>

#include "denim/bundle.hpp"
#include "denim/degradation.hpp"
#include "denim/optim.hpp"

namespace denim {

enum class LossMetric { L1, L2 };

std::string loss_metric_name(LossMetric m);
LossMetric loss_metric_from(const std::string& name);

// Scalar reconstruction loss and its gradient with respect to the
// reconstruction. Values are accumulated in double.
struct ReconLoss {
    double value = 0.0;
    Tensor grad;  // dvalue/drecon, same shape as the reconstruction
};

// Mean metric over every pixel of the batch.
ReconLoss whole_image_loss(const Tensor& recon, const Tensor& target, LossMetric metric);

// Mean metric over masked pixels only; unmasked pixels contribute nothing
// to the value or the gradient. An empty mask yields a zero loss.
ReconLoss masked_pixel_loss(const Tensor& recon, const Tensor& target, const std::vector<PatchMask>& masks,
                            LossMetric metric);

struct PretrainConfig {
    DegradationSpec degradation;             // noise -> denoising objective, mask -> inpainting objective
    LossMetric metric = LossMetric::L2;
    int epochs = 200;
    int batch_size = 128;
    OptimConfig optim;
    bool hflip = true;
    int checkpoint_every = 0;  // 0: final checkpoint only
    std::uint64_t seed = 0;
    std::string dataset_name;

    void validate() const;

    bool operator==(const PretrainConfig&) const = default;
};

struct StepResult {
    double loss = 0.0;
    double mean_degradation = 0.0;  // mean sigma (noise) or mask ratio (mask)
};

// One optimizer step on a batch of clean images: degrade, reconstruct,
// loss against the clean pixels, backprop through decoder and encoder.
// Throws TrainError if the loss goes non-finite.
StepResult pretrain_step(ModelBundle& bundle, const ImageBatch& clean, const PretrainConfig& cfg, Rng& rng,
                         AdamW& opt, double lr);

struct PretrainReport {
    std::vector<double> epoch_losses;
    std::filesystem::path final_checkpoint;
    std::filesystem::path loss_csv;
};

// Full pretraining loop: shuffled epochs with optional horizontal-flip
// augmentation, per-step loss log, periodic and final checkpoints with
// provenance describing the run.
PretrainReport pretrain_run(ModelBundle& bundle, const ImageBatch& data, const PretrainConfig& cfg,
                            const std::filesystem::path& run_dir);

}  // namespace denim
