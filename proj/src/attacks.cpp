#include "denim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "denim/finetune.hpp"

namespace denim {

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::FGSM:
            return "fgsm";
        case AttackKind::PGD:
            return "pgd";
        case AttackKind::EoTPGD:
            return "eot_pgd";
    }
    throw StateError("attack config has an invalid kind");
}

AttackKind attack_kind_from(const std::string& name) {
    if (name == "fgsm") return AttackKind::FGSM;
    if (name == "pgd") return AttackKind::PGD;
    if (name == "eot_pgd") return AttackKind::EoTPGD;
    throw ConfigError("unknown attack kind '" + name + "'");
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0)) throw ConfigError("attack.epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack.steps must be >= 1");
    if (kind != AttackKind::FGSM && !(step_size > 0.0)) throw ConfigError("attack.step_size must be > 0");
    if (eot_samples < 1) throw ConfigError("attack.eot_samples must be >= 1");
}

std::string AttackConfig::describe() const {
    std::string s = attack_kind_name(kind) + "(eps=" + std::to_string(epsilon);
    if (kind != AttackKind::FGSM) {
        s += ", steps=" + std::to_string(steps) + ", alpha=" + std::to_string(step_size);
        s += random_start ? ", random_start" : ", fixed_start";
    }
    if (kind == AttackKind::EoTPGD) s += ", samples=" + std::to_string(eot_samples);
    return s + ")";
}

PipelineGradFn defended_grad_fn(ModelBundle& bundle, const DefenseSpec& defense) {
    defense.validate();
    if (!bundle.classifier) throw StateError("bundle has no classifier head; fine-tune before attacking");
    return [&bundle, defense](const ImageBatch& x, Rng& rng) -> AttackGrad {
        if (static_cast<std::int64_t>(x.labels.size()) != x.count())
            throw ArgError("attacked batch is not fully labeled");
        ClassifierNet& cls = *bundle.classifier;
        AttackGrad out;
        if (defense.kind == DefenseSpec::Kind::None) {
            const Tensor logits = cls.forward(x);
            const CeLoss ce = cross_entropy_loss(logits, x.labels, 0.0);
            out.loss = ce.value;
            out.grad = cls.backward(ce.grad);
            for (Param* p : cls.params()) p->zero_grad();
            return out;
        }
        std::vector<PatchMask> masks;
        ImageBatch degraded = x;
        if (defense.kind == DefenseSpec::Kind::De3Noise) {
            degraded = add_noise(x, defense.sigma_de3, rng);
        } else {
            const int grid = bundle.arch.grid();
            const MaskSpec mask_spec(defense.gamma_def, grid, grid);
            masks.reserve(x.count());
            for (std::int64_t i = 0; i < x.count(); ++i) masks.push_back(sample_mask(mask_spec, rng));
        }
        const Tensor tokens = bundle.encoder.forward(degraded, masks.empty() ? nullptr : &masks);
        ImageBatch recon = x;
        recon.pixels = bundle.decoder.forward(tokens);
        const Tensor logits = cls.forward(recon);
        const CeLoss ce = cross_entropy_loss(logits, x.labels, 0.0);
        out.loss = ce.value;
        const Tensor d_recon = cls.backward(ce.grad);
        const Tensor d_tokens = bundle.decoder.backward(d_recon);
        out.grad = bundle.encoder.backward(d_tokens);
        for (Param* p : bundle.params()) p->zero_grad();
        return out;
    };
}

namespace {

// Shared ascent engine. FGSM, PGD, and EoT-PGD all reduce to this, which is
// what makes their pairwise reductions bit-exact.
ImageBatch iterate_ascent(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg, int steps,
                          double step_size, int samples, bool random_start) {
    cfg.validate();
    if (x.count() == 0) throw ArgError("attack on an empty batch");
    const float eps = static_cast<float>(cfg.epsilon);
    const std::int64_t n = x.pixels.size();

    Tensor lo = x.pixels, hi = x.pixels;
    for (std::int64_t i = 0; i < n; ++i) {
        lo[i] = std::max(lo[i] - eps, 0.0f);
        hi[i] = std::min(hi[i] + eps, 1.0f);
    }

    Rng rng(cfg.seed);
    ImageBatch adv = x;
    if (random_start) {
        for (std::int64_t i = 0; i < n; ++i) {
            const float u = static_cast<float>(rng.uniform(-cfg.epsilon, cfg.epsilon));
            adv.pixels[i] = std::clamp(adv.pixels[i] + u, lo[i], hi[i]);
        }
    }

    std::vector<double> grad_acc(static_cast<std::size_t>(n));
    for (int step = 0; step < steps; ++step) {
        std::fill(grad_acc.begin(), grad_acc.end(), 0.0);
        for (int k = 0; k < samples; ++k) {
            const AttackGrad g = pipeline(adv, rng);
            if (!std::isfinite(g.loss) || !g.grad.all_finite())
                throw AttackError("non-finite gradient at step " + std::to_string(step) + ", sample " +
                                  std::to_string(k) + " (loss=" + std::to_string(g.loss) + ")");
            if (g.grad.size() != n) throw ArgError("pipeline gradient shape does not match the input");
            for (std::int64_t i = 0; i < n; ++i) grad_acc[static_cast<std::size_t>(i)] += g.grad[i];
        }
        const float alpha = static_cast<float>(step_size);
        for (std::int64_t i = 0; i < n; ++i) {
            const double g = grad_acc[static_cast<std::size_t>(i)];
            const float sgn = g > 0.0 ? 1.0f : (g < 0.0 ? -1.0f : 0.0f);
            adv.pixels[i] = std::clamp(adv.pixels[i] + alpha * sgn, lo[i], hi[i]);
        }
    }
    return adv;
}

}  // namespace

ImageBatch fgsm(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg) {
    return iterate_ascent(pipeline, x, cfg, 1, cfg.epsilon, 1, false);
}

ImageBatch pgd(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg) {
    return iterate_ascent(pipeline, x, cfg, cfg.steps, cfg.step_size, 1, cfg.random_start);
}

ImageBatch eot_pgd(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg) {
    return iterate_ascent(pipeline, x, cfg, cfg.steps, cfg.step_size, cfg.eot_samples, cfg.random_start);
}

ImageBatch run_attack(const PipelineGradFn& pipeline, const ImageBatch& x, const AttackConfig& cfg) {
    switch (cfg.kind) {
        case AttackKind::FGSM:
            return fgsm(pipeline, x, cfg);
        case AttackKind::PGD:
            return pgd(pipeline, x, cfg);
        case AttackKind::EoTPGD:
            return eot_pgd(pipeline, x, cfg);
    }
    throw StateError("attack config has an invalid kind");
}

double robust_accuracy(ModelBundle& bundle, const DefenseSpec& defense, const AttackConfig& attack,
                       const ImageBatch& data, std::uint64_t eval_seed) {
    attack.validate();
    defense.validate();
    if (data.count() == 0) throw ArgError("robust_accuracy: empty dataset");
    if (static_cast<std::int64_t>(data.labels.size()) != data.count())
        throw ArgError("robust_accuracy: dataset is not fully labeled");
    const PipelineGradFn pipeline = defended_grad_fn(bundle, defense);
    const std::int64_t chunk_size = 128;
    const Rng attack_root(attack.seed);
    const Rng eval_root(eval_seed);
    std::int64_t correct = 0;
    for (std::int64_t start = 0, chunk = 0; start < data.count(); start += chunk_size, ++chunk) {
        const std::int64_t stop = std::min(start + chunk_size, data.count());
        std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        const ImageBatch part = data.select(idx);

        AttackConfig chunk_cfg = attack;
        chunk_cfg.seed = attack_root.child(static_cast<std::uint64_t>(chunk)).seed();
        const ImageBatch adv = run_attack(pipeline, part, chunk_cfg);

        Rng chunk_rng = eval_root.child(static_cast<std::uint64_t>(chunk));
        const Tensor logits = defend_predict(bundle, defense, adv, chunk_rng);
        const std::vector<int> got = predict_classes(logits);
        for (std::size_t i = 0; i < got.size(); ++i)
            if (got[i] == part.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.count());
}

}  // namespace denim
