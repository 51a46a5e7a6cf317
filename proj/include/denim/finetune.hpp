#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "denim/bundle.hpp"
#include "denim/degradation.hpp"
#include "denim/optim.hpp"

namespace denim {

// Batched image-to-image map; the denoiser slot of the fine-tuning and
// defense pipelines. Tests inject identity or other stand-ins.
using Reconstructor = std::function<ImageBatch(const ImageBatch&)>;

// g_phi(f_theta(x)) with the bundle's frozen pretrained pair. Output pixels
// live in the unclipped reconstruction domain.
ImageBatch reconstruct(ModelBundle& bundle, const ImageBatch& x);
Reconstructor bundle_reconstructor(ModelBundle& bundle);

// Mean cross entropy with label smoothing; grad is with respect to logits.
struct CeLoss {
    double value = 0.0;
    double accuracy = 0.0;
    Tensor grad;  // (B, classes)
};
CeLoss cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels, double label_smoothing);

enum class FinetuneMode { Clean, Denoised };

std::string finetune_mode_name(FinetuneMode m);
FinetuneMode finetune_mode_from(const std::string& name);

struct FinetuneConfig {
    FinetuneMode mode = FinetuneMode::Clean;
    SigmaSpec sigma_ft = SigmaSpec::uniform(0.0, 30.0);  // Denoised mode: noise before the denoiser
    int epochs = 100;
    int batch_size = 128;
    OptimConfig optim;
    double label_smoothing = 0.1;
    bool augment = true;  // horizontal flip + shifted crop
    int crop_pad = 4;
    std::uint64_t seed = 0;
    std::string dataset_name;

    void validate() const;

    bool operator==(const FinetuneConfig&) const = default;
};

struct FinetuneStepResult {
    double loss = 0.0;
    double accuracy = 0.0;
    double mean_sigma = 0.0;
};

// One optimizer step of the classifier on a labeled batch. In Denoised mode
// the batch is noised per image and passed through `denoiser` first; the
// denoiser itself receives no gradient and is never updated.
FinetuneStepResult finetune_step(ClassifierNet& cls, const Reconstructor& denoiser, const ImageBatch& batch,
                                 const FinetuneConfig& cfg, Rng& rng, AdamW& opt, double lr);

struct FinetuneReport {
    std::vector<double> epoch_losses;
    std::vector<double> epoch_accuracies;
    std::filesystem::path final_checkpoint;
    std::filesystem::path loss_csv;
};

// Attaches a classifier (pretrained encoder copy + fresh head) to the bundle
// and trains it. The bundle's encoder/decoder weights are left untouched.
FinetuneReport finetune_run(ModelBundle& bundle, const ImageBatch& data, const FinetuneConfig& cfg,
                            const std::filesystem::path& run_dir);

}  // namespace denim
