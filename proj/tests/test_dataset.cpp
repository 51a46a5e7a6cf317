#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "denim/dataset.hpp"
#include "denim/serde.hpp"

using namespace denim;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

bool same_pixels(const ImageBatch& a, const ImageBatch& b) {
    if (a.pixels.size() != b.pixels.size()) return false;
    for (std::int64_t i = 0; i < a.pixels.size(); ++i)
        if (a.pixels[i] != b.pixels[i]) return false;
    return true;
}

// Dominant gradient orientation of one image, folded into [0, pi), via the
// summed structure tensor of the green channel.
double dominant_orientation(const ImageBatch& batch, std::int64_t i) {
    const float* img = batch.image_data(i);
    const std::int64_t h = batch.height(), w = batch.width();
    auto px = [&](std::int64_t r, std::int64_t c) { return static_cast<double>(img[(r * w + c) * 3 + 1]); };
    double jxx = 0.0, jxy = 0.0, jyy = 0.0;
    for (std::int64_t r = 1; r + 1 < h; ++r)
        for (std::int64_t c = 1; c + 1 < w; ++c) {
            const double gx = (px(r, c + 1) - px(r, c - 1)) / 2.0;
            const double gy = (px(r + 1, c) - px(r - 1, c)) / 2.0;
            jxx += gx * gx;
            jxy += gx * gy;
            jyy += gy * gy;
        }
    double angle = 0.5 * std::atan2(2.0 * jxy, jxx - jyy);
    const double pi = std::acos(-1.0);
    while (angle < 0.0) angle += pi;
    while (angle >= pi) angle -= pi;
    return angle;
}

void write_cifar_file(const std::filesystem::path& path, const std::vector<int>& labels,
                      const std::vector<std::array<unsigned char, 3>>& plane_fill) {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.put(static_cast<char>(labels[i]));
        for (int ch = 0; ch < 3; ++ch)
            for (int p = 0; p < 1024; ++p) out.put(static_cast<char>(plane_fill[i][static_cast<std::size_t>(ch)]));
    }
}

void write_png(const std::filesystem::path& path, int size, cv::Vec3b bgr) {
    cv::Mat m(size, size, CV_8UC3, cv::Scalar(bgr[0], bgr[1], bgr[2]));
    cv::imwrite(path.string(), m);
}

}  // namespace

TEST_CASE("dataset spec validation names the offending field") {
    DatasetSpec s;
    CHECK_NOTHROW(s.validate());
    CHECK(s.describe().find("synth10") != std::string::npos);

    s.name = "imagenet";
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("dataset.name"), ConfigError);
    s.name = "synth10";
    s.train_count = -1;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("train_count"), ConfigError);
    s.train_count = 0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("positive for synth10"), ConfigError);
    s.train_count = 100;
    s.image_size = 0;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("dataset.image_size"), ConfigError);
    s.image_size = 48;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("must be 32"), ConfigError);
    s.image_size = 32;

    DatasetSpec f;
    f.name = "folder";
    CHECK_THROWS_WITH_AS(f.validate(), doctest::Contains("dataset.path"), ConfigError);
    f.path = "/somewhere";
    f.image_size = 48;
    CHECK_NOTHROW(f.validate());
}

TEST_CASE("synth10 generation is deterministic per seed and in range") {
    Rng a(7), b(7), c(8);
    const ImageBatch x = make_synth10(40, a);
    const ImageBatch y = make_synth10(40, b);
    const ImageBatch z = make_synth10(40, c);
    CHECK(same_pixels(x, y));
    CHECK(x.labels == y.labels);
    CHECK_FALSE(same_pixels(x, z));

    CHECK(x.count() == 40);
    CHECK(x.height() == 32);
    CHECK(x.width() == 32);
    CHECK(x.channels() == 3);
    for (std::int64_t i = 0; i < x.pixels.size(); ++i) {
        CHECK(x.pixels[i] >= 0.0f);
        CHECK(x.pixels[i] <= 1.0f);
    }
    for (std::int64_t i = 0; i < 40; ++i) CHECK(x.labels[static_cast<std::size_t>(i)] == static_cast<int>(i % 10));
}

TEST_CASE("synth10 class orientation is recoverable from the structure tensor") {
    Rng rng(11);
    const ImageBatch data = make_synth10(200, rng);
    const double pi = std::acos(-1.0);
    int correct = 0;
    for (std::int64_t i = 0; i < data.count(); ++i) {
        const double angle = dominant_orientation(data, i);
        int k = static_cast<int>(std::lround(angle / (pi / 10.0))) % 10;
        if (k == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(correct >= 180);
}

TEST_CASE("synth10 dataset load produces balanced disjoint splits") {
    DatasetSpec s;
    s.train_count = 60;
    s.test_count = 30;
    s.seed = 5;
    const Dataset d = load_dataset(s);
    CHECK(d.train.count() == 60);
    CHECK(d.test.count() == 30);
    CHECK(d.class_names.size() == 10);
    CHECK(d.class_names[1] == "grating-018");
    CHECK(d.skipped == 0);
    CHECK_FALSE(same_pixels(d.train, d.test));

    const Dataset again = load_dataset(s);
    CHECK(same_pixels(d.test, again.test));
    CHECK(d.test.labels == again.test.labels);
}

TEST_CASE("cifar binary records decode planar rgb into channel-last floats") {
    const auto dir = temp_dir("denim_cifar_fixture");
    write_cifar_file(dir / "one.bin", {3, 9}, {{{255, 0, 128}}, {{10, 20, 30}}});

    std::vector<float> pixels;
    std::vector<int> labels;
    read_cifar_bin(dir / "one.bin", pixels, labels);
    REQUIRE(labels.size() == 2);
    CHECK(labels[0] == 3);
    CHECK(labels[1] == 9);
    REQUIRE(pixels.size() == 2u * 3072u);
    CHECK(pixels[0] == 1.0f);
    CHECK(pixels[1] == 0.0f);
    CHECK(pixels[2] == doctest::Approx(128.0 / 255.0));
    CHECK(pixels[3072] == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("cifar loader rejects truncated files and bad labels") {
    const auto dir = temp_dir("denim_cifar_bad");
    write_cifar_file(dir / "ok.bin", {1}, {{{1, 2, 3}}});
    std::ofstream(dir / "short.bin", std::ios::binary) << "abc";
    std::vector<float> pixels;
    std::vector<int> labels;
    CHECK_THROWS_WITH_AS(read_cifar_bin(dir / "short.bin", pixels, labels), doctest::Contains("3073"), IoError);
    CHECK_THROWS_AS(read_cifar_bin(dir / "missing.bin", pixels, labels), IoError);

    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad.put(static_cast<char>(11));
    for (int i = 0; i < 3072; ++i) bad.put(static_cast<char>(0));
    bad.close();
    CHECK_THROWS_WITH_AS(read_cifar_bin(dir / "bad.bin", pixels, labels), doctest::Contains("outside 0..9"), IoError);
}

TEST_CASE("cifar dataset assembles five train batches and honors the cache variable") {
    const auto dir = temp_dir("denim_cifar_root");
    const auto root = dir / "cifar-10-batches-bin";
    std::filesystem::create_directories(root);
    for (int b = 1; b <= 5; ++b)
        write_cifar_file(root / ("data_batch_" + std::to_string(b) + ".bin"), {b % 10, (b + 1) % 10},
                         {{{1, 1, 1}}, {{2, 2, 2}}});
    write_cifar_file(root / "test_batch.bin", {0, 1, 2}, {{{3, 3, 3}}, {{4, 4, 4}}, {{5, 5, 5}}});

    DatasetSpec s;
    s.name = "cifar10";
    s.path = root.string();
    s.train_count = 0;
    s.test_count = 0;
    const Dataset d = load_dataset(s);
    CHECK(d.train.count() == 10);
    CHECK(d.test.count() == 3);
    CHECK(d.class_names.size() == 10);
    CHECK(d.class_names[0] == "airplane");
    CHECK(d.test.labels == std::vector<int>{0, 1, 2});

    setenv("DENIM_DATA_DIR", dir.string().c_str(), 1);
    DatasetSpec via_env = s;
    via_env.path.clear();
    const Dataset e = load_dataset(via_env);
    CHECK(e.train.count() == 10);
    unsetenv("DENIM_DATA_DIR");
    CHECK_THROWS_WITH_AS(load_dataset(via_env), doctest::Contains("DENIM_DATA_DIR"), IoError);
}

TEST_CASE("image folder ingestion sorts classes and skips corrupt files") {
    const auto root = temp_dir("denim_folder");
    for (const char* cls : {"cats", "dogs", "apes"}) std::filesystem::create_directories(root / cls);
    write_png(root / "apes" / "a.png", 8, {255, 0, 0});
    write_png(root / "apes" / "b.png", 8, {0, 255, 0});
    write_png(root / "cats" / "a.png", 16, {0, 0, 255});
    write_png(root / "cats" / "b.png", 16, {10, 10, 10});
    write_png(root / "dogs" / "a.png", 8, {50, 60, 70});
    write_png(root / "dogs" / "b.png", 8, {80, 90, 100});

    std::vector<std::string> classes;
    int skipped = 0;
    const ImageBatch all = load_image_folder(root, 16, classes, skipped);
    CHECK(all.count() == 6);
    CHECK(all.height() == 16);
    CHECK(classes == std::vector<std::string>{"apes", "cats", "dogs"});
    CHECK(skipped == 0);
    CHECK(all.labels == std::vector<int>{0, 0, 1, 1, 2, 2});
    CHECK(all.image_data(0)[0] == doctest::Approx(0.0).epsilon(0.02));
    CHECK(all.image_data(0)[2] == doctest::Approx(1.0).epsilon(0.02));

    std::ofstream(root / "cats" / "broken.png") << "not an image";
    const ImageBatch with_bad = load_image_folder(root, 16, classes, skipped);
    CHECK(with_bad.count() == 6);
    CHECK(skipped == 1);

    CHECK_THROWS_AS(load_image_folder(root / "nope", 16, classes, skipped), IoError);
}

TEST_CASE("folder dataset requires matching train and test class sets") {
    const auto root = temp_dir("denim_folder_split");
    for (const char* split : {"train", "test"}) {
        std::filesystem::create_directories(root / split / "x");
        std::filesystem::create_directories(root / split / "y");
        write_png(root / split / "x" / "1.png", 8, {1, 2, 3});
        write_png(root / split / "y" / "1.png", 8, {4, 5, 6});
    }

    DatasetSpec s;
    s.name = "folder";
    s.path = root.string();
    s.train_count = 0;
    s.test_count = 0;
    s.image_size = 8;
    const Dataset d = load_dataset(s);
    CHECK(d.train.count() == 2);
    CHECK(d.test.count() == 2);
    CHECK(d.class_names == std::vector<std::string>{"x", "y"});

    std::filesystem::create_directories(root / "test" / "z");
    write_png(root / "test" / "z" / "1.png", 8, {7, 8, 9});
    CHECK_THROWS_WITH_AS(load_dataset(s), doctest::Contains("different classes"), IoError);
}

TEST_CASE("subsample picks identical sorted indices per seed") {
    Rng rng(3);
    const ImageBatch data = make_synth10(50, rng);
    const ImageBatch a = subsample(data, 20, 9);
    const ImageBatch b = subsample(data, 20, 9);
    const ImageBatch c = subsample(data, 20, 10);
    CHECK(a.count() == 20);
    CHECK(same_pixels(a, b));
    CHECK(a.labels == b.labels);
    CHECK_FALSE(same_pixels(a, c));

    std::vector<int> order;
    for (std::int64_t i = 0; i < a.count(); ++i) {
        for (std::int64_t j = 0; j < data.count(); ++j)
            if (std::equal(a.image_data(i), a.image_data(i) + data.pixels_per_image(), data.image_data(j))) {
                order.push_back(static_cast<int>(j));
                break;
            }
    }
    REQUIRE(order.size() == 20);
    CHECK(std::is_sorted(order.begin(), order.end()));

    const ImageBatch full = subsample(data, 0, 4);
    CHECK(full.count() == 50);
    CHECK_THROWS_AS(subsample(data, 51, 4), ArgError);
}

TEST_CASE("dataset spec round-trips through json") {
    DatasetSpec s;
    s.name = "folder";
    s.path = "/data/pets";
    s.train_count = 120;
    s.test_count = 40;
    s.image_size = 48;
    s.seed = 77;
    const json j = s;
    CHECK(j.at("name") == "folder");
    CHECK(j.get<DatasetSpec>() == s);

    const json stray = {{"name", "synth10"}, {"count", 10}};
    CHECK_THROWS_WITH_AS(stray.get<DatasetSpec>(), doctest::Contains("count"), ConfigError);
    const json bad = {{"name", "mnist"}};
    CHECK_THROWS_WITH_AS(bad.get<DatasetSpec>(), doctest::Contains("dataset.name"), ConfigError);
}
