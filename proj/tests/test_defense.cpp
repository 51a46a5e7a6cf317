#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "denim/defense.hpp"
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

// Untrained bundle with a randomly initialized head, enough for the logits
// to respond to input changes.
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

// Denoiser pretrained at the noise level the defense will use.
ModelBundle& trained_denoiser() {
    static ModelBundle bundle = [] {
        ModelBundle b = make_bundle(tiny_arch(), 87);
        ImageBatch data = quadrant_set(8, 88);
        PretrainConfig pre;
        pre.degradation = DegradationSpec::noise(SigmaSpec::global(70.0));
        pre.epochs = 60;
        pre.batch_size = 32;
        pre.optim.base_lr = 2e-3;
        pre.optim.warmup_epochs = 2.0;
        pre.hflip = false;
        pre.seed = 870;
        pretrain_run(b, data, pre, temp_dir("denim_defense_pre"));
        return b;
    }();
    return bundle;
}

double mse(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("defense spec validation names the offending field") {
    CHECK_THROWS_WITH_AS(DefenseSpec::de3_noise(-1.0), doctest::Contains("sigma_de3"), ConfigError);
    CHECK_THROWS_WITH_AS(DefenseSpec::de3_mask(1.5), doctest::Contains("gamma_def"), ConfigError);
    CHECK_THROWS_WITH_AS(DefenseSpec::de3_noise(70.0, 0), doctest::Contains("eot_votes"), ConfigError);
    CHECK(DefenseSpec::none().describe() == "none");
    CHECK(DefenseSpec::de3_noise(70.0, 3).describe().find("de3_noise") != std::string::npos);
    CHECK(DefenseSpec::de3_mask(0.75).describe().find("de3_mask") != std::string::npos);
    CHECK_FALSE(DefenseSpec::none().randomized());
    CHECK_FALSE(DefenseSpec::de3_noise(0.0).randomized());
    CHECK(DefenseSpec::de3_noise(30.0).randomized());
    CHECK(DefenseSpec::de3_mask(0.5).randomized());
}

TEST_CASE("no defense is a pass-through to the classifier") {
    ModelBundle bundle = random_cls_bundle(41);
    const ImageBatch x = random_batch(6, 42);
    Rng rng(7);
    const Tensor defended = defend_predict(bundle, DefenseSpec::none(), x, rng);
    const Tensor plain = bundle.classifier->forward(clip01(x));
    CHECK(defended == plain);
    CHECK(defended.all_finite());
}

TEST_CASE("zero-noise single-vote defense equals denoise-then-classify") {
    ModelBundle bundle = random_cls_bundle(43);
    const ImageBatch x = random_batch(5, 44);
    Rng rng_a(1), rng_b(2);
    const Tensor a = defend_predict(bundle, DefenseSpec::de3_noise(0.0, 1), x, rng_a);
    const Tensor b = defend_predict(bundle, DefenseSpec::de3_noise(0.0, 1), x, rng_b);
    CHECK(a == b);
    const ImageBatch recon = reconstruct(bundle, clip01(x));
    const Tensor direct = bundle.classifier->forward(recon);
    CHECK(a == direct);
}

TEST_CASE("defended prediction is reproducible for a fixed seed") {
    ModelBundle bundle = random_cls_bundle(45);
    const ImageBatch x = random_batch(4, 46);
    const DefenseSpec defense = DefenseSpec::de3_noise(30.0, 2);
    Rng r1(99), r2(99), r3(100);
    const Tensor a = defend_predict(bundle, defense, x, r1);
    const Tensor b = defend_predict(bundle, defense, x, r2);
    const Tensor c = defend_predict(bundle, defense, x, r3);
    CHECK(a == b);
    float max_diff = 0.0f;
    for (std::int64_t i = 0; i < a.size(); ++i) max_diff = std::max(max_diff, std::abs(a[i] - c[i]));
    CHECK(max_diff > 0.0f);
}

TEST_CASE("vote averaging decomposes into per-vote sub-streams") {
    ModelBundle bundle = random_cls_bundle(47);
    const ImageBatch x = random_batch(3, 48);
    const DefenseSpec defense = DefenseSpec::de3_noise(25.0, 4);
    Rng root(555);
    const Tensor averaged = defend_predict(bundle, defense, x, root);

    std::vector<double> acc(static_cast<std::size_t>(averaged.size()), 0.0);
    for (int v = 0; v < defense.eot_votes; ++v) {
        Rng vote_rng = root.child(static_cast<std::uint64_t>(v));
        const Tensor one = defend_vote(bundle, defense, x, vote_rng);
        for (std::int64_t i = 0; i < one.size(); ++i) acc[static_cast<std::size_t>(i)] += one[i];
    }
    Tensor expected = averaged;
    for (std::int64_t i = 0; i < expected.size(); ++i)
        expected[i] = static_cast<float>(acc[static_cast<std::size_t>(i)] / defense.eot_votes);
    CHECK(averaged == expected);
}

TEST_CASE("masking defense runs the mask-token path deterministically") {
    ModelBundle bundle = random_cls_bundle(49);
    const ImageBatch x = random_batch(4, 50);
    const DefenseSpec defense = DefenseSpec::de3_mask(0.5, 2);
    Rng r1(3), r2(3), r3(4);
    const Tensor a = defend_predict(bundle, defense, x, r1);
    const Tensor b = defend_predict(bundle, defense, x, r2);
    const Tensor c = defend_predict(bundle, defense, x, r3);
    CHECK(a.all_finite());
    CHECK(a == b);
    float max_diff = 0.0f;
    for (std::int64_t i = 0; i < a.size(); ++i) max_diff = std::max(max_diff, std::abs(a[i] - c[i]));
    CHECK(max_diff > 0.0f);

    Rng r4(5);
    const Tensor no_mask = defend_predict(bundle, DefenseSpec::de3_mask(0.0, 1), x, r4);
    const Tensor direct = bundle.classifier->forward(reconstruct(bundle, clip01(x)));
    CHECK(no_mask == direct);
}

TEST_CASE("defended prediction without a classifier is a state error") {
    ModelBundle bundle = make_bundle(tiny_arch(), 51);
    const ImageBatch x = random_batch(2, 52);
    Rng rng(1);
    CHECK_THROWS_WITH_AS(defend_predict(bundle, DefenseSpec::none(), x, rng), doctest::Contains("classifier"),
                         StateError);
    CHECK_THROWS_WITH_AS(defend_predict(bundle, DefenseSpec::de3_noise(70.0), x, rng), doctest::Contains("classifier"),
                         StateError);
}

TEST_CASE("defense noise floods the attack radius by the documented ratio") {
    const DefenseSpec defense = DefenseSpec::de3_noise(70.0);
    const double attack_radius = 4.0 / 255.0;
    const double ratio = (defense.sigma_de3 / 255.0) / attack_radius;
    CHECK(ratio == doctest::Approx(17.5).epsilon(1e-12));
}

TEST_CASE("defended accuracy is deterministic and chunk-seeded") {
    ModelBundle bundle = random_cls_bundle(53);
    const ImageBatch data = quadrant_set(4, 54);
    const DefenseSpec defense = DefenseSpec::de3_noise(20.0, 2);
    const double a = defended_accuracy(bundle, defense, data, 77);
    const double b = defended_accuracy(bundle, defense, data, 77);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    ImageBatch unlabeled = data;
    unlabeled.labels.clear();
    CHECK_THROWS_AS(defended_accuracy(bundle, defense, unlabeled, 77), ArgError);
}

TEST_CASE("reconstruction grid lays out originals, degraded, and reconstructions") {
    ModelBundle bundle = make_bundle(tiny_arch(), 55);
    const ImageBatch x = random_batch(5, 56);
    Rng rng(9);
    const auto triple = reconstruct_triple(bundle, x, DegradationSpec::noise(SigmaSpec::global(70.0)), rng);
    CHECK(triple.original.count() == 5);
    CHECK(triple.degraded.count() == 5);
    CHECK(triple.reconstructed.count() == 5);
    CHECK(triple.reconstructed.pixels.all_finite());

    const auto dir = temp_dir("denim_defense_grid");
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "grid.png").string();
    write_reconstruction_grid(triple, path);
    const cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
    REQUIRE_FALSE(img.empty());
    CHECK(img.rows == 5 * 8);
    CHECK(img.cols == 3 * 8);
    CHECK(img.channels() == 3);

    CHECK_THROWS_AS(write_reconstruction_grid(triple, (dir / "missing" / "grid.png").string()), IoError);
}

TEST_CASE("masked reconstruction grid blanks the degraded column only") {
    ModelBundle bundle = make_bundle(tiny_arch(), 57);
    const ImageBatch x = random_batch(3, 58);
    Rng rng(10);
    const auto triple = reconstruct_triple(bundle, x, DegradationSpec::masking(MaskSpec(0.5, 2, 2)), rng);
    CHECK(triple.original.pixels == clip01(x).pixels);
    double zeros = 0.0;
    for (std::int64_t i = 0; i < triple.degraded.pixels.size(); ++i)
        if (triple.degraded.pixels[i] == 0.0f) zeros += 1.0;
    CHECK(zeros / static_cast<double>(triple.degraded.pixels.size()) >= 0.4);
}

TEST_CASE("trained denoiser improves on the degraded column") {
    ModelBundle& bundle = trained_denoiser();
    const ImageBatch x = quadrant_set(4, 60);
    Rng rng(11);
    const auto triple = reconstruct_triple(bundle, x, DegradationSpec::noise(SigmaSpec::global(70.0)), rng);
    const double degraded_mse = mse(triple.degraded.pixels, triple.original.pixels);
    const double recon_mse = mse(triple.reconstructed.pixels, triple.original.pixels);
    CHECK(recon_mse < degraded_mse);
}

TEST_CASE("defense spec round-trips through json") {
    for (const DefenseSpec& d :
         {DefenseSpec::none(), DefenseSpec::de3_noise(55.0, 4), DefenseSpec::de3_mask(0.6, 2)}) {
        const json j = d;
        const DefenseSpec back = j.get<DefenseSpec>();
        CHECK(back == d);
    }
    const json stray = {{"kind", "de3_noise"}, {"votes", 2}};
    CHECK_THROWS_WITH_AS(stray.get<DefenseSpec>(), doctest::Contains("votes"), ConfigError);
    const json bad_kind = {{"kind", "fog"}};
    CHECK_THROWS_WITH_AS(bad_kind.get<DefenseSpec>(), doctest::Contains("fog"), ConfigError);
}
