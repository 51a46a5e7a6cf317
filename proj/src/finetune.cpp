#include "denim/finetune.hpp"

#include <cmath>
#include <numeric>

#include "denim/artifact_io.hpp"
#include "denim/vit.hpp"

namespace denim {

ImageBatch reconstruct(ModelBundle& bundle, const ImageBatch& x) {
    Tensor tokens = bundle.encoder.forward(x);
    ImageBatch out(bundle.decoder.forward(tokens), x.labels);
    return out;
}

Reconstructor bundle_reconstructor(ModelBundle& bundle) {
    return [&bundle](const ImageBatch& x) { return reconstruct(bundle, x); };
}

CeLoss cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels, double label_smoothing) {
    if (logits.rank() != 2) throw ArgError("cross entropy: logits must be (batch, classes)");
    const std::int64_t b = logits.dim(0), k = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != b) throw ArgError("cross entropy: label count mismatch");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw ArgError("cross entropy: label_smoothing must be in [0,1)");

    CeLoss out;
    out.grad = Tensor::zeros(logits.shape());
    Tensor probs = softmax(logits);
    const double off = label_smoothing / static_cast<double>(k);
    const double on = 1.0 - label_smoothing + off;
    const double inv_b = 1.0 / static_cast<double>(b);

    double acc = 0.0;
    int correct = 0;
    for (std::int64_t r = 0; r < b; ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= k) throw ArgError("cross entropy: label out of range");
        const float row_max = logits.mat(b, k).row(r).maxCoeff();
        double log_sum = 0.0;
        for (std::int64_t c = 0; c < k; ++c)
            log_sum += std::exp(static_cast<double>(logits[r * k + c]) - static_cast<double>(row_max));
        log_sum = std::log(log_sum);

        Eigen::Index argmax = 0;
        logits.mat(b, k).row(r).maxCoeff(&argmax);
        if (static_cast<int>(argmax) == y) ++correct;

        for (std::int64_t c = 0; c < k; ++c) {
            const double target = c == y ? on : off;
            const double logp =
                static_cast<double>(logits[r * k + c]) - static_cast<double>(row_max) - log_sum;
            acc -= target * logp;
            out.grad[r * k + c] = static_cast<float>((static_cast<double>(probs[r * k + c]) - target) * inv_b);
        }
    }
    out.value = acc * inv_b;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(b);
    return out;
}

std::string finetune_mode_name(FinetuneMode m) { return m == FinetuneMode::Clean ? "clean" : "denoised"; }

FinetuneMode finetune_mode_from(const std::string& name) {
    if (name == "clean") return FinetuneMode::Clean;
    if (name == "denoised") return FinetuneMode::Denoised;
    throw ConfigError("finetune.mode must be clean or denoised (got \"" + name + "\")");
}

void FinetuneConfig::validate() const {
    optim.validate();
    if (mode == FinetuneMode::Denoised) sigma_ft.validate();
    if (epochs < 1) throw ConfigError("finetune.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("finetune.batch_size must be >= 1");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw ConfigError("finetune.label_smoothing must be in [0,1)");
    if (crop_pad < 0) throw ConfigError("finetune.crop_pad must be >= 0");
}

FinetuneStepResult finetune_step(ClassifierNet& cls, const Reconstructor& denoiser, const ImageBatch& batch,
                                 const FinetuneConfig& cfg, Rng& rng, AdamW& opt, double lr) {
    if (batch.count() == 0) throw ArgError("finetune step: empty batch");
    if (batch.labels.empty()) throw ArgError("finetune step: batch has no labels");

    FinetuneStepResult result;
    ImageBatch input = batch;
    if (cfg.mode == FinetuneMode::Denoised) {
        if (!denoiser) throw ArgError("finetune step: denoised mode needs a denoiser");
        double sigma_sum = 0.0;
        for (std::int64_t i = 0; i < input.count(); ++i) {
            const double s = sample_sigma(cfg.sigma_ft, rng);
            sigma_sum += s;
            add_noise_inplace(input, i, s, rng);
        }
        result.mean_sigma = sigma_sum / static_cast<double>(input.count());
        input = denoiser(input);
        input.labels = batch.labels;
    }

    Tensor logits = cls.forward(input);
    const CeLoss loss = cross_entropy_loss(logits, input.labels, cfg.label_smoothing);
    if (!std::isfinite(loss.value)) throw TrainError("finetune step: non-finite loss");
    cls.backward(loss.grad);
    opt.step(lr);

    result.loss = loss.value;
    result.accuracy = loss.accuracy;
    return result;
}

FinetuneReport finetune_run(ModelBundle& bundle, const ImageBatch& data, const FinetuneConfig& cfg,
                            const std::filesystem::path& run_dir) {
    cfg.validate();
    if (data.count() == 0) throw ArgError("finetune: empty dataset");
    if (data.labels.empty()) throw ArgError("finetune: dataset has no labels");
    std::filesystem::create_directories(run_dir);

    bundle.attach_classifier();
    ClassifierNet& cls = *bundle.classifier;
    {
        Rng head_rng = Rng(cfg.seed).child(0x68656164);  // fresh head, seeded
        cls.head.init(head_rng, 0.01f);
        cls.head.b.value.zero();
    }

    Rng root(cfg.seed);
    AdamW opt(cls.params(), cfg.optim);
    Reconstructor denoiser = cfg.mode == FinetuneMode::Denoised ? bundle_reconstructor(bundle) : Reconstructor{};

    FinetuneReport report;
    report.loss_csv = run_dir / "finetune_loss.csv";
    CsvWriter log(report.loss_csv, {"epoch", "step", "loss", "accuracy", "mean_sigma"});

    const std::int64_t n = data.count();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = root.child(static_cast<std::uint64_t>(epoch));
        for (std::int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[erng.next_index(i + 1)]);

        double epoch_loss = 0.0, epoch_acc = 0.0;
        for (std::int64_t step = 0; step < steps_per_epoch; ++step) {
            const std::int64_t from = step * cfg.batch_size;
            const std::int64_t to = std::min(from + cfg.batch_size, n);
            std::vector<std::int64_t> idx(order.begin() + from, order.begin() + to);
            ImageBatch batch = data.select(idx);
            if (cfg.augment) {
                for (std::int64_t i = 0; i < batch.count(); ++i) {
                    if (erng.coin()) hflip_inplace(batch, i);
                    if (cfg.crop_pad > 0) {
                        const int oy = static_cast<int>(erng.next_index(2 * cfg.crop_pad + 1));
                        const int ox = static_cast<int>(erng.next_index(2 * cfg.crop_pad + 1));
                        shift_crop_inplace(batch, i, cfg.crop_pad, oy, ox);
                    }
                }
            }

            const double lr =
                scheduled_lr(cfg.optim, epoch + static_cast<double>(step) / steps_per_epoch, cfg.epochs);
            const FinetuneStepResult sr = finetune_step(cls, denoiser, batch, cfg, erng, opt, lr);
            log.row({static_cast<double>(epoch), static_cast<double>(step), sr.loss, sr.accuracy,
                     sr.mean_sigma});
            epoch_loss += sr.loss * static_cast<double>(to - from);
            epoch_acc += sr.accuracy * static_cast<double>(to - from);
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
        report.epoch_accuracies.push_back(epoch_acc / static_cast<double>(n));
    }

    bundle.provenance["stage"] = "finetune";
    bundle.provenance["finetune_mode"] = finetune_mode_name(cfg.mode);
    if (cfg.mode == FinetuneMode::Denoised) bundle.provenance["finetune_sigma"] = cfg.sigma_ft.describe();
    bundle.provenance["finetune_epochs"] = std::to_string(cfg.epochs);
    bundle.provenance["finetune_seed"] = std::to_string(cfg.seed);
    bundle.provenance["label_smoothing"] = CsvWriter::format_cell(cfg.label_smoothing);
    bundle.provenance["finetune_augmentation"] =
        cfg.augment ? "hflip+crop" + std::to_string(cfg.crop_pad) : "none";
    if (!cfg.dataset_name.empty()) bundle.provenance["finetune_dataset"] = cfg.dataset_name;

    report.final_checkpoint = run_dir / "final.ckpt";
    save_bundle(bundle, report.final_checkpoint);
    return report;
}

}  // namespace denim
