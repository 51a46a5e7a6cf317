#include "denim/pretrain.hpp"

#include <cmath>
#include <numeric>

#include "denim/artifact_io.hpp"

namespace denim {

std::string loss_metric_name(LossMetric m) { return m == LossMetric::L1 ? "l1" : "l2"; }

LossMetric loss_metric_from(const std::string& name) {
    if (name == "l1") return LossMetric::L1;
    if (name == "l2") return LossMetric::L2;
    throw ConfigError("loss metric must be l1 or l2 (got \"" + name + "\")");
}

namespace {

double metric_value(float diff, LossMetric metric) {
    return metric == LossMetric::L2 ? static_cast<double>(diff) * static_cast<double>(diff)
                                    : std::abs(static_cast<double>(diff));
}

float metric_grad(float diff, LossMetric metric, double inv_count) {
    if (metric == LossMetric::L2) return static_cast<float>(2.0 * static_cast<double>(diff) * inv_count);
    if (diff > 0.0f) return static_cast<float>(inv_count);
    if (diff < 0.0f) return static_cast<float>(-inv_count);
    return 0.0f;
}

}  // namespace

ReconLoss whole_image_loss(const Tensor& recon, const Tensor& target, LossMetric metric) {
    if (!recon.same_shape(target)) throw ArgError("reconstruction loss: shape mismatch");
    if (recon.size() == 0) throw ArgError("reconstruction loss: empty tensors");
    ReconLoss out;
    out.grad = Tensor::zeros(recon.shape());
    const double inv = 1.0 / static_cast<double>(recon.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < recon.size(); ++i) {
        const float diff = recon[i] - target[i];
        acc += metric_value(diff, metric);
        out.grad[i] = metric_grad(diff, metric, inv);
    }
    out.value = acc * inv;
    return out;
}

ReconLoss masked_pixel_loss(const Tensor& recon, const Tensor& target, const std::vector<PatchMask>& masks,
                            LossMetric metric) {
    if (!recon.same_shape(target)) throw ArgError("reconstruction loss: shape mismatch");
    if (recon.rank() != 4) throw ArgError("masked loss: expected (batch, height, width, channels)");
    const std::int64_t b = recon.dim(0), h = recon.dim(1), w = recon.dim(2), c = recon.dim(3);
    if (masks.size() != 1 && static_cast<std::int64_t>(masks.size()) != b)
        throw ArgError("masked loss: mask count does not match batch size");

    ReconLoss out;
    out.grad = Tensor::zeros(recon.shape());

    // First pass counts masked pixels so the gradient carries the final
    // normalization.
    std::int64_t masked_pixels = 0;
    for (std::int64_t ib = 0; ib < b; ++ib) {
        const PatchMask& m = masks[masks.size() == 1 ? 0 : static_cast<std::size_t>(ib)];
        if (m.rows <= 0 || h % m.rows != 0 || m.cols <= 0 || w % m.cols != 0)
            throw ArgError("masked loss: mask grid does not divide the image");
        masked_pixels += static_cast<std::int64_t>(m.popcount()) * (h / m.rows) * (w / m.cols) * c;
    }
    if (masked_pixels == 0) return out;

    const double inv = 1.0 / static_cast<double>(masked_pixels);
    double acc = 0.0;
    for (std::int64_t ib = 0; ib < b; ++ib) {
        const PatchMask& m = masks[masks.size() == 1 ? 0 : static_cast<std::size_t>(ib)];
        const std::int64_t ph = h / m.rows, pw = w / m.cols;
        for (int patch = 0; patch < m.num_patches(); ++patch) {
            if (!m.masked(patch)) continue;
            const std::int64_t r0 = (patch / m.cols) * ph, c0 = (patch % m.cols) * pw;
            for (std::int64_t r = r0; r < r0 + ph; ++r)
                for (std::int64_t col = c0; col < c0 + pw; ++col)
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const std::int64_t idx = ((ib * h + r) * w + col) * c + ch;
                        const float diff = recon[idx] - target[idx];
                        acc += metric_value(diff, metric);
                        out.grad[idx] = metric_grad(diff, metric, inv);
                    }
        }
    }
    out.value = acc * inv;
    return out;
}

void PretrainConfig::validate() const {
    degradation.validate();
    optim.validate();
    if (epochs < 1) throw ConfigError("pretrain.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("pretrain.batch_size must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("pretrain.checkpoint_every must be >= 0");
}

StepResult pretrain_step(ModelBundle& bundle, const ImageBatch& clean, const PretrainConfig& cfg, Rng& rng,
                         AdamW& opt, double lr) {
    const std::int64_t b = clean.count();
    if (b == 0) throw ArgError("pretrain step: empty batch");

    StepResult result;
    ReconLoss loss;
    if (cfg.degradation.kind == DegradationSpec::Kind::Noise) {
        ImageBatch noisy = clean;
        std::vector<double> sigmas(static_cast<std::size_t>(b));
        double sigma_sum = 0.0;
        for (std::int64_t i = 0; i < b; ++i) {
            const double s = sample_sigma(cfg.degradation.sigma, rng);
            sigmas[static_cast<std::size_t>(i)] = s;
            sigma_sum += s;
            add_noise_inplace(noisy, i, s, rng);
        }
        result.mean_degradation = sigma_sum / static_cast<double>(b);

        Tensor tokens = bundle.encoder.forward(noisy);
        Tensor recon = bundle.decoder.forward(tokens);
        loss = whole_image_loss(recon, clean.pixels, cfg.metric);
        if (!std::isfinite(loss.value)) {
            std::string msg = "pretrain step: non-finite loss; sigmas:";
            for (double s : sigmas) msg += " " + std::to_string(s);
            throw TrainError(msg);
        }
        Tensor d_tokens = bundle.decoder.backward(loss.grad);
        bundle.encoder.backward(d_tokens);
    } else {
        std::vector<PatchMask> masks;
        masks.reserve(static_cast<std::size_t>(b));
        for (std::int64_t i = 0; i < b; ++i) masks.push_back(sample_mask(cfg.degradation.mask, rng));
        result.mean_degradation = cfg.degradation.mask.ratio;

        Tensor tokens = bundle.encoder.forward(clean, &masks);
        Tensor recon = bundle.decoder.forward(tokens);
        loss = masked_pixel_loss(recon, clean.pixels, masks, cfg.metric);
        if (!std::isfinite(loss.value)) throw TrainError("pretrain step: non-finite loss under masking");
        Tensor d_tokens = bundle.decoder.backward(loss.grad);
        bundle.encoder.backward(d_tokens);
    }

    opt.step(lr);
    result.loss = loss.value;
    return result;
}

namespace {

ImageBatch gather(const ImageBatch& data, const std::vector<std::int64_t>& order, std::int64_t from,
                  std::int64_t to) {
    std::vector<std::int64_t> idx(order.begin() + from, order.begin() + to);
    return data.select(idx);
}

}  // namespace

PretrainReport pretrain_run(ModelBundle& bundle, const ImageBatch& data, const PretrainConfig& cfg,
                            const std::filesystem::path& run_dir) {
    cfg.validate();
    if (data.count() == 0) throw ArgError("pretrain: empty dataset");
    std::filesystem::create_directories(run_dir);

    const bool is_noise = cfg.degradation.kind == DegradationSpec::Kind::Noise;
    Rng root(cfg.seed);
    AdamW opt(bundle.params(), cfg.optim);

    PretrainReport report;
    report.loss_csv = run_dir / "pretrain_loss.csv";
    CsvWriter log(report.loss_csv, {"epoch", "step", "loss", is_noise ? "mean_sigma" : "mask_ratio"});

    const std::int64_t n = data.count();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = root.child(static_cast<std::uint64_t>(epoch));
        for (std::int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[erng.next_index(i + 1)]);

        double epoch_loss = 0.0;
        for (std::int64_t step = 0; step < steps_per_epoch; ++step) {
            const std::int64_t from = step * cfg.batch_size;
            const std::int64_t to = std::min(from + cfg.batch_size, n);
            ImageBatch batch = gather(data, order, from, to);
            if (cfg.hflip)
                for (std::int64_t i = 0; i < batch.count(); ++i)
                    if (erng.coin()) hflip_inplace(batch, i);

            const double lr = scheduled_lr(cfg.optim, epoch + static_cast<double>(step) / steps_per_epoch,
                                           cfg.epochs);
            StepResult sr;
            try {
                sr = pretrain_step(bundle, batch, cfg, erng, opt, lr);
            } catch (const TrainError& e) {
                throw TrainError("epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " +
                                 e.what());
            }
            log.row({static_cast<double>(epoch), static_cast<double>(step), sr.loss, sr.mean_degradation});
            epoch_loss += sr.loss * static_cast<double>(to - from);
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(n));

        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch%04d.ckpt", epoch + 1);
            save_bundle(bundle, run_dir / name);
        }
    }

    bundle.provenance["stage"] = "pretrain";
    bundle.provenance["objective"] = is_noise ? "nim" : "mim";
    bundle.provenance["degradation"] = cfg.degradation.describe();
    bundle.provenance["metric"] = loss_metric_name(cfg.metric);
    bundle.provenance["epochs"] = std::to_string(cfg.epochs);
    bundle.provenance["batch_size"] = std::to_string(cfg.batch_size);
    bundle.provenance["augmentation"] = cfg.hflip ? "hflip" : "none";
    bundle.provenance["seed"] = std::to_string(cfg.seed);
    if (!cfg.dataset_name.empty()) bundle.provenance["dataset"] = cfg.dataset_name;

    report.final_checkpoint = run_dir / "final.ckpt";
    save_bundle(bundle, report.final_checkpoint);
    return report;
}

}  // namespace denim
