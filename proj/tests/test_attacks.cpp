#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "denim/attacks.hpp"
#include "denim/finetune.hpp"
#include "denim/pretrain.hpp"
#include "denim/serde.hpp"

using namespace denim;

namespace {

ArchConfig tiny_arch() {
    ArchConfig a;
    a.image_size = 8;
    a.patch_size = 4;
    a.embed_dim = 24;
    a.depth_encoder = 2;
    a.depth_decoder = 1;
    a.num_heads = 3;
    a.mlp_ratio = 2.0f;
    a.num_classes = 4;
    return a;
}

ImageBatch random_batch(std::int64_t count, std::uint64_t seed) {
    ImageBatch b(count, 8, 8, 3);
    Rng rng(seed);
    for (std::int64_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    b.labels.assign(static_cast<std::size_t>(count), 0);
    for (std::int64_t i = 0; i < count; ++i) b.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 4);
    return b;
}

ModelBundle random_cls_bundle(std::uint64_t seed) {
    ModelBundle bundle = make_bundle(tiny_arch(), seed);
    bundle.attach_classifier();
    Rng rng = Rng(seed).child(1);
    bundle.classifier->head.w.init_normal(rng, 0.3f);
    return bundle;
}

ImageBatch quadrant_set(std::int64_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    const std::int64_t n = 4 * per_class;
    ImageBatch d(n, 8, 8, 3);
    d.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const int k = static_cast<int>(i % 4);
        d.labels[static_cast<std::size_t>(i)] = k;
        float* img = d.image_data(i);
        const std::int64_t r0 = (k / 2) * 4, c0 = (k % 2) * 4;
        for (std::int64_t r = 0; r < 8; ++r)
            for (std::int64_t c = 0; c < 8; ++c)
                for (std::int64_t ch = 0; ch < 3; ++ch) {
                    const bool bright = r >= r0 && r < r0 + 4 && c >= c0 && c < c0 + 4;
                    img[(r * 8 + c) * 3 + ch] = (bright ? 0.85f : 0.15f) + static_cast<float>(rng.uniform(-0.08, 0.08));
                }
    }
    return d;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

struct TrainedFixture {
    ModelBundle bundle;
    ImageBatch data;
};

// Pretrained denoiser plus a clean-fine-tuned classifier that solves the
// quadrant task perfectly; shared by the accuracy-facing tests.
TrainedFixture& trained_model() {
    static TrainedFixture fx = [] {
        TrainedFixture f{make_bundle(tiny_arch(), 87), quadrant_set(8, 88)};
        PretrainConfig pre;
        pre.degradation = DegradationSpec::noise(SigmaSpec::uniform(0.0, 50.0));
        pre.epochs = 40;
        pre.batch_size = 32;
        pre.optim.base_lr = 2e-3;
        pre.optim.warmup_epochs = 2.0;
        pre.hflip = false;
        pre.seed = 870;
        pretrain_run(f.bundle, f.data, pre, temp_dir("denim_attacks_pre"));
        FinetuneConfig ft;
        ft.mode = FinetuneMode::Clean;
        ft.epochs = 60;
        ft.batch_size = 16;
        ft.optim.base_lr = 2e-3;
        ft.optim.warmup_epochs = 1.0;
        ft.augment = false;
        ft.label_smoothing = 0.0;
        ft.seed = 89;
        finetune_run(f.bundle, f.data, ft, temp_dir("denim_attacks_ft"));
        return f;
    }();
    return fx;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    float m = 0.0f;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool within_box(const Tensor& t) {
    for (std::int64_t i = 0; i < t.size(); ++i)
        if (t[i] < 0.0f || t[i] > 1.0f) return false;
    return true;
}

}  // namespace

TEST_CASE("attack config validation names the offending field") {
    AttackConfig a;
    a.epsilon = -0.1;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("epsilon"), ConfigError);
    a = AttackConfig{};
    a.steps = 0;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("steps"), ConfigError);
    a = AttackConfig{};
    a.step_size = 0.0;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("step_size"), ConfigError);
    a = AttackConfig{};
    a.eot_samples = 0;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("eot_samples"), ConfigError);
    a = AttackConfig{};
    a.kind = AttackKind::FGSM;
    a.step_size = 0.0;
    CHECK_NOTHROW(a.validate());
    CHECK(AttackConfig{}.describe().find("pgd") != std::string::npos);
    CHECK(attack_kind_from("eot_pgd") == AttackKind::EoTPGD);
    CHECK_THROWS_WITH_AS(attack_kind_from("carlini"), doctest::Contains("carlini"), ConfigError);
}

TEST_CASE("zero-radius attacks return the input unchanged") {
    ModelBundle bundle = random_cls_bundle(61);
    const PipelineGradFn pipeline = defended_grad_fn(bundle, DefenseSpec::none());
    const ImageBatch x = random_batch(4, 62);
    AttackConfig cfg;
    cfg.epsilon = 0.0;
    cfg.seed = 5;
    for (AttackKind kind : {AttackKind::FGSM, AttackKind::PGD, AttackKind::EoTPGD}) {
        cfg.kind = kind;
        const ImageBatch adv = run_attack(pipeline, x, cfg);
        CHECK(adv.pixels == x.pixels);
        CHECK(adv.labels == x.labels);
    }
}

TEST_CASE("perturbations respect the radius and the pixel box") {
    ModelBundle bundle = random_cls_bundle(63);
    const ImageBatch x = random_batch(4, 64);
    AttackConfig cfg;
    cfg.epsilon = 8.0 / 255.0;
    cfg.steps = 5;
    cfg.step_size = 3.0 / 255.0;
    cfg.eot_samples = 3;
    cfg.seed = 6;
    for (const DefenseSpec& defense : {DefenseSpec::none(), DefenseSpec::de3_noise(20.0), DefenseSpec::de3_mask(0.5)}) {
        const PipelineGradFn pipeline = defended_grad_fn(bundle, defense);
        for (AttackKind kind : {AttackKind::FGSM, AttackKind::PGD, AttackKind::EoTPGD}) {
            cfg.kind = kind;
            const ImageBatch adv = run_attack(pipeline, x, cfg);
            CHECK(max_abs_diff(adv.pixels, x.pixels) <= static_cast<float>(cfg.epsilon) + 1e-6f);
            CHECK(within_box(adv.pixels));
        }
    }
}

TEST_CASE("single-step attack equals one projected ascent step") {
    ModelBundle bundle = random_cls_bundle(65);
    const PipelineGradFn pipeline = defended_grad_fn(bundle, DefenseSpec::none());
    const ImageBatch x = random_batch(4, 66);
    AttackConfig cfg;
    cfg.epsilon = 6.0 / 255.0;
    cfg.seed = 7;
    const ImageBatch one_shot = fgsm(pipeline, x, cfg);
    cfg.steps = 1;
    cfg.step_size = cfg.epsilon;
    cfg.random_start = false;
    const ImageBatch one_step = pgd(pipeline, x, cfg);
    CHECK(one_shot.pixels == one_step.pixels);
}

TEST_CASE("gradient sign on a logistic model matches the closed form") {
    const std::int64_t n = 8 * 8 * 3;
    std::vector<double> w(static_cast<std::size_t>(n));
    Rng wrng(67);
    for (auto& v : w) v = wrng.uniform(-1.0, 1.0);
    w[5] = 0.0;

    const PipelineGradFn logistic = [&w, n](const ImageBatch& batch, Rng&) -> AttackGrad {
        AttackGrad out;
        out.grad = Tensor::zeros({batch.count(), 8, 8, 3});
        for (std::int64_t b = 0; b < batch.count(); ++b) {
            const float* img = batch.image_data(b);
            double z = 0.0;
            for (std::int64_t i = 0; i < n; ++i) z += w[static_cast<std::size_t>(i)] * img[i];
            const double s = batch.labels[static_cast<std::size_t>(b)] == 1 ? 1.0 : -1.0;
            out.loss += std::log1p(std::exp(-s * z));
            const double dz = -s / (1.0 + std::exp(s * z));
            float* g = out.grad.data() + b * n;
            for (std::int64_t i = 0; i < n; ++i) g[i] = static_cast<float>(dz * w[static_cast<std::size_t>(i)]);
        }
        out.loss /= static_cast<double>(batch.count());
        return out;
    };

    ImageBatch x(2, 8, 8, 3);
    for (std::int64_t i = 0; i < x.pixels.size(); ++i) x.pixels[i] = 0.5f;
    x.labels = {1, 0};
    AttackConfig cfg;
    cfg.kind = AttackKind::FGSM;
    cfg.epsilon = 0.05;
    const ImageBatch adv = fgsm(logistic, x, cfg);

    for (std::int64_t b = 0; b < 2; ++b) {
        const double s = x.labels[static_cast<std::size_t>(b)] == 1 ? 1.0 : -1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double wi = w[static_cast<std::size_t>(i)];
            const float expected =
                0.5f + static_cast<float>(cfg.epsilon) * static_cast<float>(wi == 0.0 ? 0.0 : (s > 0 ? -1.0 : 1.0) *
                                                                                                  (wi > 0 ? 1.0 : -1.0));
            CHECK(adv.pixels[b * n + i] == doctest::Approx(expected).epsilon(1e-6));
        }
    }
}

TEST_CASE("projected ascent stops at the ball boundary on a concave objective") {
    const PipelineGradFn concave = [](const ImageBatch& batch, Rng&) -> AttackGrad {
        AttackGrad out;
        out.grad = Tensor::zeros({batch.count(), 1, 1, 1});
        const double c = 0.9;
        for (std::int64_t b = 0; b < batch.count(); ++b) {
            const double v = static_cast<double>(batch.pixels[b]);
            out.loss += -(v - c) * (v - c);
            out.grad[b] = static_cast<float>(-2.0 * (v - c));
        }
        return out;
    };
    ImageBatch x(1, 1, 1, 1);
    x.pixels[0] = 0.3f;
    x.labels = {0};
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.steps = 20;
    cfg.step_size = 0.02;
    cfg.seed = 68;
    for (bool random_start : {false, true}) {
        cfg.random_start = random_start;
        const ImageBatch adv = pgd(concave, x, cfg);
        CHECK(adv.pixels[0] == doctest::Approx(0.4).epsilon(1e-6));
    }
}

TEST_CASE("expectation-over-transformation with one sample reduces to plain ascent") {
    ModelBundle bundle = random_cls_bundle(69);
    const PipelineGradFn pipeline = defended_grad_fn(bundle, DefenseSpec::none());
    const ImageBatch x = random_batch(4, 70);
    AttackConfig cfg;
    cfg.epsilon = 8.0 / 255.0;
    cfg.steps = 4;
    cfg.step_size = 2.0 / 255.0;
    cfg.eot_samples = 1;
    cfg.seed = 71;
    const ImageBatch a = eot_pgd(pipeline, x, cfg);
    const ImageBatch b = pgd(pipeline, x, cfg);
    CHECK(a.pixels == b.pixels);
}

TEST_CASE("averaging gradients over defense noise strengthens the attack") {
    TrainedFixture& fx = trained_model();
    const DefenseSpec defense = DefenseSpec::de3_noise(70.0, 3);
    AttackConfig cfg;
    cfg.kind = AttackKind::EoTPGD;
    cfg.epsilon = 16.0 / 255.0;
    cfg.steps = 10;
    cfg.step_size = 4.0 / 255.0;
    double success_one = 0.0, success_many = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        cfg.eot_samples = 1;
        success_one += 1.0 - robust_accuracy(fx.bundle, defense, cfg, fx.data, 5);
        cfg.eot_samples = 10;
        success_many += 1.0 - robust_accuracy(fx.bundle, defense, cfg, fx.data, 5);
    }
    CHECK(success_many / 5.0 >= success_one / 5.0);
}

TEST_CASE("robust accuracy reduces to clean accuracy at zero radius") {
    TrainedFixture& fx = trained_model();
    const DefenseSpec defense = DefenseSpec::de3_noise(40.0, 2);
    AttackConfig cfg;
    cfg.epsilon = 0.0;
    cfg.steps = 3;
    cfg.step_size = 1.0 / 255.0;
    cfg.seed = 72;
    const double robust = robust_accuracy(fx.bundle, defense, cfg, fx.data, 9);
    const double clean = defended_accuracy(fx.bundle, defense, fx.data, 9);
    CHECK(robust == clean);
}

TEST_CASE("a strong attack collapses the undefended model and the defense recovers some of it") {
    TrainedFixture& fx = trained_model();
    const DefenseSpec none = DefenseSpec::none();
    const double clean = defended_accuracy(fx.bundle, none, fx.data, 5);
    CHECK(clean == 1.0);

    AttackConfig cfg;
    cfg.epsilon = 32.0 / 255.0;
    cfg.steps = 10;
    cfg.step_size = 8.0 / 255.0;
    cfg.seed = 11;
    const double undefended = robust_accuracy(fx.bundle, none, cfg, fx.data, 5);
    CHECK(undefended < 0.05);

    const DefenseSpec defense = DefenseSpec::de3_noise(40.0, 3);
    const double defended = robust_accuracy(fx.bundle, defense, cfg, fx.data, 5);
    CHECK(defended > undefended);

    cfg.epsilon = 16.0 / 255.0;
    cfg.step_size = 4.0 / 255.0;
    const double moderate = robust_accuracy(fx.bundle, none, cfg, fx.data, 5);
    CHECK(moderate <= clean);
}

TEST_CASE("non-finite gradients abort with diagnostics") {
    const PipelineGradFn broken = [](const ImageBatch& batch, Rng&) -> AttackGrad {
        AttackGrad out;
        out.grad = Tensor::full({batch.count(), 8, 8, 3}, std::numeric_limits<float>::quiet_NaN());
        out.loss = 1.0;
        return out;
    };
    const ImageBatch x = random_batch(2, 73);
    AttackConfig cfg;
    cfg.epsilon = 4.0 / 255.0;
    CHECK_THROWS_WITH_AS(pgd(broken, x, cfg), doctest::Contains("non-finite"), AttackError);
}

TEST_CASE("robust accuracy rejects unusable datasets") {
    ModelBundle bundle = random_cls_bundle(74);
    AttackConfig cfg;
    const ImageBatch empty(0, 8, 8, 3);
    CHECK_THROWS_AS(robust_accuracy(bundle, DefenseSpec::none(), cfg, empty, 1), ArgError);
    ImageBatch unlabeled = random_batch(3, 75);
    unlabeled.labels.clear();
    CHECK_THROWS_AS(robust_accuracy(bundle, DefenseSpec::none(), cfg, unlabeled, 1), ArgError);
}

TEST_CASE("attack config round-trips through json") {
    AttackConfig a;
    a.kind = AttackKind::EoTPGD;
    a.epsilon = 8.0 / 255.0;
    a.steps = 7;
    a.step_size = 1.0 / 255.0;
    a.eot_samples = 4;
    a.random_start = false;
    a.seed = 99;
    const json j = a;
    const AttackConfig back = j.get<AttackConfig>();
    CHECK(back == a);
    const json stray = {{"kind", "pgd"}, {"alpha", 0.1}};
    CHECK_THROWS_WITH_AS(stray.get<AttackConfig>(), doctest::Contains("alpha"), ConfigError);
}
