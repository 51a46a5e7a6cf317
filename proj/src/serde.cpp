#include "denim/serde.hpp"

#include <algorithm>

namespace denim {

void check_known_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
}

void to_json(json& j, const ArchConfig& a) {
    j = json{{"image_size", a.image_size},   {"patch_size", a.patch_size},
             {"channels", a.channels},       {"embed_dim", a.embed_dim},
             {"depth_encoder", a.depth_encoder}, {"depth_decoder", a.depth_decoder},
             {"num_heads", a.num_heads},     {"mlp_ratio", a.mlp_ratio},
             {"num_classes", a.num_classes}};
}

void from_json(const json& j, ArchConfig& a) {
    check_known_keys(j, "arch",
                     {"image_size", "patch_size", "channels", "embed_dim", "depth_encoder", "depth_decoder",
                      "num_heads", "mlp_ratio", "num_classes"});
    read_opt(j, "image_size", a.image_size);
    read_opt(j, "patch_size", a.patch_size);
    read_opt(j, "channels", a.channels);
    read_opt(j, "embed_dim", a.embed_dim);
    read_opt(j, "depth_encoder", a.depth_encoder);
    read_opt(j, "depth_decoder", a.depth_decoder);
    read_opt(j, "num_heads", a.num_heads);
    read_opt(j, "mlp_ratio", a.mlp_ratio);
    read_opt(j, "num_classes", a.num_classes);
}

namespace {

std::string sigma_kind_name(SigmaSpec::Kind k) {
    switch (k) {
        case SigmaSpec::Kind::Global: return "global";
        case SigmaSpec::Kind::Uniform: return "uniform";
        case SigmaSpec::Kind::Gamma: return "gamma";
    }
    throw ConfigError("sigma.kind is invalid");
}

SigmaSpec::Kind sigma_kind_from(const std::string& name) {
    if (name == "global") return SigmaSpec::Kind::Global;
    if (name == "uniform") return SigmaSpec::Kind::Uniform;
    if (name == "gamma") return SigmaSpec::Kind::Gamma;
    throw ConfigError("sigma.kind must be one of global, uniform, gamma (got \"" + name + "\")");
}

}  // namespace

void to_json(json& j, const SigmaSpec& s) {
    j = json{{"kind", sigma_kind_name(s.kind)}};
    switch (s.kind) {
        case SigmaSpec::Kind::Global: j["sigma0"] = s.sigma0; break;
        case SigmaSpec::Kind::Uniform:
            j["lo"] = s.lo;
            j["hi"] = s.hi;
            break;
        case SigmaSpec::Kind::Gamma:
            j["shape"] = s.shape;
            j["scale"] = s.scale;
            break;
    }
}

void from_json(const json& j, SigmaSpec& s) {
    check_known_keys(j, "sigma", {"kind", "sigma0", "lo", "hi", "shape", "scale"});
    s.kind = sigma_kind_from(j.at("kind").get<std::string>());
    read_opt(j, "sigma0", s.sigma0);
    read_opt(j, "lo", s.lo);
    read_opt(j, "hi", s.hi);
    read_opt(j, "shape", s.shape);
    read_opt(j, "scale", s.scale);
    s.validate();
}

void to_json(json& j, const MaskSpec& m) {
    j = json{{"ratio", m.ratio}, {"rows", m.rows}, {"cols", m.cols}};
}

void from_json(const json& j, MaskSpec& m) {
    check_known_keys(j, "mask", {"ratio", "rows", "cols"});
    read_opt(j, "ratio", m.ratio);
    read_opt(j, "rows", m.rows);
    read_opt(j, "cols", m.cols);
    m.validate();
}

void to_json(json& j, const DegradationSpec& d) {
    if (d.kind == DegradationSpec::Kind::Noise)
        j = json{{"kind", "noise"}, {"sigma", d.sigma}};
    else
        j = json{{"kind", "mask"}, {"mask", d.mask}};
}

void from_json(const json& j, DegradationSpec& d) {
    check_known_keys(j, "degradation", {"kind", "sigma", "mask"});
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "noise") {
        d.kind = DegradationSpec::Kind::Noise;
        j.at("sigma").get_to(d.sigma);
    } else if (kind == "mask") {
        d.kind = DegradationSpec::Kind::Mask;
        j.at("mask").get_to(d.mask);
    } else {
        throw ConfigError("degradation.kind must be noise or mask (got \"" + kind + "\")");
    }
}

void to_json(json& j, const OptimConfig& o) {
    j = json{{"base_lr", o.base_lr},
             {"weight_decay", o.weight_decay},
             {"warmup_epochs", o.warmup_epochs},
             {"cosine_schedule", o.cosine_schedule},
             {"beta1", o.beta1},
             {"beta2", o.beta2},
             {"eps", o.eps}};
}

void from_json(const json& j, OptimConfig& o) {
    check_known_keys(j, "optim",
                     {"base_lr", "weight_decay", "warmup_epochs", "cosine_schedule", "beta1", "beta2", "eps"});
    read_opt(j, "base_lr", o.base_lr);
    read_opt(j, "weight_decay", o.weight_decay);
    read_opt(j, "warmup_epochs", o.warmup_epochs);
    read_opt(j, "cosine_schedule", o.cosine_schedule);
    read_opt(j, "beta1", o.beta1);
    read_opt(j, "beta2", o.beta2);
    read_opt(j, "eps", o.eps);
    o.validate();
}

void to_json(json& j, const DefenseSpec& d) {
    j = json{{"kind", defense_kind_name(d.kind)}, {"eot_votes", d.eot_votes}};
    if (d.kind == DefenseSpec::Kind::De3Noise) j["sigma_de3"] = d.sigma_de3;
    if (d.kind == DefenseSpec::Kind::De3Mask) j["gamma_def"] = d.gamma_def;
}

void from_json(const json& j, DefenseSpec& d) {
    check_known_keys(j, "defense", {"kind", "sigma_de3", "gamma_def", "eot_votes"});
    d.kind = defense_kind_from(j.at("kind").get<std::string>());
    read_opt(j, "sigma_de3", d.sigma_de3);
    read_opt(j, "gamma_def", d.gamma_def);
    read_opt(j, "eot_votes", d.eot_votes);
    d.validate();
}

void to_json(json& j, const AttackConfig& a) {
    j = json{{"kind", attack_kind_name(a.kind)}, {"epsilon", a.epsilon},     {"steps", a.steps},
             {"step_size", a.step_size},         {"eot_samples", a.eot_samples},
             {"random_start", a.random_start},   {"seed", a.seed}};
}

void from_json(const json& j, AttackConfig& a) {
    check_known_keys(j, "attack", {"kind", "epsilon", "steps", "step_size", "eot_samples", "random_start", "seed"});
    if (j.contains("kind")) a.kind = attack_kind_from(j.at("kind").get<std::string>());
    read_opt(j, "epsilon", a.epsilon);
    read_opt(j, "steps", a.steps);
    read_opt(j, "step_size", a.step_size);
    read_opt(j, "eot_samples", a.eot_samples);
    read_opt(j, "random_start", a.random_start);
    read_opt(j, "seed", a.seed);
    a.validate();
}

void to_json(json& j, const DatasetSpec& d) {
    j = json{{"name", d.name},           {"path", d.path}, {"train_count", d.train_count},
             {"test_count", d.test_count}, {"image_size", d.image_size}, {"seed", d.seed}};
}

void from_json(const json& j, DatasetSpec& d) {
    check_known_keys(j, "dataset", {"name", "path", "train_count", "test_count", "image_size", "seed"});
    read_opt(j, "name", d.name);
    read_opt(j, "path", d.path);
    read_opt(j, "train_count", d.train_count);
    read_opt(j, "test_count", d.test_count);
    read_opt(j, "image_size", d.image_size);
    read_opt(j, "seed", d.seed);
    d.validate();
}

void to_json(json& j, const PretrainConfig& p) {
    j = json{{"degradation", p.degradation},
             {"metric", loss_metric_name(p.metric)},
             {"epochs", p.epochs},
             {"batch_size", p.batch_size},
             {"optim", p.optim},
             {"hflip", p.hflip},
             {"checkpoint_every", p.checkpoint_every},
             {"seed", p.seed},
             {"dataset_name", p.dataset_name}};
}

void from_json(const json& j, PretrainConfig& p) {
    check_known_keys(j, "pretrain",
                     {"degradation", "metric", "epochs", "batch_size", "optim", "hflip", "checkpoint_every", "seed",
                      "dataset_name"});
    read_opt(j, "degradation", p.degradation);
    if (j.contains("metric")) p.metric = loss_metric_from(j.at("metric").get<std::string>());
    read_opt(j, "epochs", p.epochs);
    read_opt(j, "batch_size", p.batch_size);
    read_opt(j, "optim", p.optim);
    read_opt(j, "hflip", p.hflip);
    read_opt(j, "checkpoint_every", p.checkpoint_every);
    read_opt(j, "seed", p.seed);
    read_opt(j, "dataset_name", p.dataset_name);
    p.validate();
}

void to_json(json& j, const FinetuneConfig& f) {
    j = json{{"mode", finetune_mode_name(f.mode)},
             {"sigma_ft", f.sigma_ft},
             {"epochs", f.epochs},
             {"batch_size", f.batch_size},
             {"optim", f.optim},
             {"label_smoothing", f.label_smoothing},
             {"augment", f.augment},
             {"crop_pad", f.crop_pad},
             {"seed", f.seed},
             {"dataset_name", f.dataset_name}};
}

void from_json(const json& j, FinetuneConfig& f) {
    check_known_keys(j, "finetune",
                     {"mode", "sigma_ft", "epochs", "batch_size", "optim", "label_smoothing", "augment", "crop_pad",
                      "seed", "dataset_name"});
    if (j.contains("mode")) f.mode = finetune_mode_from(j.at("mode").get<std::string>());
    read_opt(j, "sigma_ft", f.sigma_ft);
    read_opt(j, "epochs", f.epochs);
    read_opt(j, "batch_size", f.batch_size);
    read_opt(j, "optim", f.optim);
    read_opt(j, "label_smoothing", f.label_smoothing);
    read_opt(j, "augment", f.augment);
    read_opt(j, "crop_pad", f.crop_pad);
    read_opt(j, "seed", f.seed);
    read_opt(j, "dataset_name", f.dataset_name);
    f.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"dataset", c.dataset}, {"arch", c.arch},     {"pretrain", c.pretrain},
             {"finetune", c.finetune}, {"defense", c.defense}, {"attack", c.attack},
             {"output_dir", c.output_dir}, {"seed", c.seed}};
}

void from_json(const json& j, ExperimentConfig& c) {
    check_known_keys(j, "config",
                     {"dataset", "arch", "pretrain", "finetune", "defense", "attack", "output_dir", "seed"});
    read_opt(j, "dataset", c.dataset);
    read_opt(j, "arch", c.arch);
    read_opt(j, "pretrain", c.pretrain);
    read_opt(j, "finetune", c.finetune);
    read_opt(j, "defense", c.defense);
    read_opt(j, "attack", c.attack);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "seed", c.seed);
    c.validate();
}

}  // namespace denim
