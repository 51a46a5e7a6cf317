#include "denim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace denim {

namespace {

constexpr std::int64_t kSynthSize = 32;
constexpr std::int64_t kCifarSize = 32;
constexpr std::int64_t kCifarRecord = 1 + 3 * kCifarSize * kCifarSize;

const char* kCifarClasses[10] = {"airplane", "automobile", "bird",  "cat",  "deer",
                                 "dog",      "frog",       "horse", "ship", "truck"};

bool is_known_name(const std::string& name) {
    return name == "synth10" || name == "cifar10" || name == "folder";
}

std::filesystem::path cifar_root(const DatasetSpec& spec) {
    if (!spec.path.empty()) return spec.path;
    if (const char* cache = std::getenv("DENIM_DATA_DIR")) return std::filesystem::path(cache) / "cifar-10-batches-bin";
    throw IoError("cifar10 needs dataset.path or the DENIM_DATA_DIR environment variable");
}

}  // namespace

void DatasetSpec::validate() const {
    if (!is_known_name(name)) throw ConfigError("dataset.name must be synth10, cifar10 or folder, got '" + name + "'");
    if (train_count < 0 || test_count < 0) throw ConfigError("dataset.train_count/test_count must be >= 0");
    if (name == "synth10" && (train_count == 0 || test_count == 0))
        throw ConfigError("dataset.train_count/test_count must be positive for synth10");
    if (name == "folder" && path.empty()) throw ConfigError("dataset.path is required for folder datasets");
    if (image_size <= 0) throw ConfigError("dataset.image_size must be positive");
    if (name != "folder" && image_size != 32) throw ConfigError("dataset.image_size must be 32 for " + name);
}

std::string DatasetSpec::describe() const {
    std::string s = name;
    if (!path.empty()) s += " at " + path;
    s += " (train " + std::to_string(train_count) + ", test " + std::to_string(test_count) + ")";
    return s;
}

ImageBatch make_synth10(std::int64_t count, Rng& rng) {
    ImageBatch batch(count, kSynthSize, kSynthSize, 3);
    batch.labels.resize(static_cast<std::size_t>(count));
    const double pi = std::acos(-1.0);
    for (std::int64_t i = 0; i < count; ++i) {
        const int k = static_cast<int>(i % 10);
        batch.labels[static_cast<std::size_t>(i)] = k;

        const double theta = pi * k / 10.0 + rng.uniform(-pi / 40.0, pi / 40.0);
        const double freq = rng.uniform(2.0, 4.0);
        const double phase = rng.uniform(0.0, 2.0 * pi);
        const double amp = rng.uniform(0.16, 0.26);
        const double ux = std::cos(theta), uy = std::sin(theta);

        double offset[3], slope_r[3], slope_c[3];
        for (int ch = 0; ch < 3; ++ch) offset[ch] = rng.uniform(-0.08, 0.08);
        for (int ch = 0; ch < 3; ++ch) slope_r[ch] = rng.uniform(-0.1, 0.1);
        for (int ch = 0; ch < 3; ++ch) slope_c[ch] = rng.uniform(-0.1, 0.1);

        float* img = batch.image_data(i);
        for (std::int64_t r = 0; r < kSynthSize; ++r) {
            for (std::int64_t c = 0; c < kSynthSize; ++c) {
                const double along = (ux * static_cast<double>(c) + uy * static_cast<double>(r)) / kSynthSize;
                const double grating = amp * std::sin(2.0 * pi * freq * along + phase);
                for (int ch = 0; ch < 3; ++ch) {
                    const double wash = offset[ch] + slope_r[ch] * (static_cast<double>(r) / kSynthSize) +
                                        slope_c[ch] * (static_cast<double>(c) / kSynthSize);
                    const double v = 0.5 + grating + wash + 0.03 * rng.normal();
                    img[(r * kSynthSize + c) * 3 + ch] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
    }
    return batch;
}

void read_cifar_bin(const std::filesystem::path& file, std::vector<float>& pixels, std::vector<int>& labels) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    in.seekg(0, std::ios::end);
    const std::int64_t bytes = static_cast<std::int64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (bytes % kCifarRecord != 0)
        throw IoError(file.string() + " is not a whole number of " + std::to_string(kCifarRecord) + "-byte records");

    const std::int64_t records = bytes / kCifarRecord;
    std::vector<unsigned char> record(static_cast<std::size_t>(kCifarRecord));
    constexpr std::int64_t plane = kCifarSize * kCifarSize;
    for (std::int64_t r = 0; r < records; ++r) {
        in.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
        if (!in) throw IoError("short read in " + file.string());
        const int label = record[0];
        if (label > 9) throw IoError(file.string() + " contains label " + std::to_string(label) + " outside 0..9");
        labels.push_back(label);
        const std::size_t base = pixels.size();
        pixels.resize(base + static_cast<std::size_t>(3 * plane));
        for (std::int64_t p = 0; p < plane; ++p)
            for (int ch = 0; ch < 3; ++ch)
                pixels[base + static_cast<std::size_t>(p * 3 + ch)] =
                    static_cast<float>(record[static_cast<std::size_t>(1 + ch * plane + p)]) / 255.0f;
    }
}

ImageBatch load_image_folder(const std::filesystem::path& root, int image_size,
                             std::vector<std::string>& class_names, int& skipped) {
    if (!std::filesystem::is_directory(root)) throw IoError("image folder " + root.string() + " does not exist");

    class_names.clear();
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
    std::sort(class_names.begin(), class_names.end());
    if (class_names.empty()) throw IoError("image folder " + root.string() + " has no class subdirectories");

    std::vector<float> pixels;
    std::vector<int> labels;
    skipped = 0;
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(root / class_names[k]))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
            if (bgr.empty()) {
                ++skipped;
                continue;
            }
            cv::Mat sized;
            cv::resize(bgr, sized, cv::Size(image_size, image_size), 0, 0, cv::INTER_AREA);
            cv::Mat rgb;
            cv::cvtColor(sized, rgb, cv::COLOR_BGR2RGB);
            const std::size_t base = pixels.size();
            pixels.resize(base + static_cast<std::size_t>(image_size) * image_size * 3);
            for (int r = 0; r < image_size; ++r)
                for (int c = 0; c < image_size; ++c) {
                    const cv::Vec3b px = rgb.at<cv::Vec3b>(r, c);
                    for (int ch = 0; ch < 3; ++ch)
                        pixels[base + (static_cast<std::size_t>(r) * image_size + c) * 3 + ch] = px[ch] / 255.0f;
                }
            labels.push_back(static_cast<int>(k));
        }
    }
    if (labels.empty()) throw IoError("image folder " + root.string() + " has no readable images");

    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    ImageBatch batch(n, image_size, image_size, 3);
    std::copy(pixels.begin(), pixels.end(), batch.pixels.data());
    batch.labels = std::move(labels);
    return batch;
}

ImageBatch subsample(const ImageBatch& data, std::int64_t count, std::uint64_t seed) {
    if (count > data.count())
        throw ArgError("subsample of " + std::to_string(count) + " from " + std::to_string(data.count()) + " items");
    if (count == data.count() || count == 0) return data;

    std::vector<std::int64_t> pool(static_cast<std::size_t>(data.count()));
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(seed);
    for (std::int64_t i = 0; i < count; ++i) {
        const std::int64_t j = i + static_cast<std::int64_t>(rng.next_index(static_cast<std::uint64_t>(data.count() - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<std::int64_t> chosen(pool.begin(), pool.begin() + count);
    std::sort(chosen.begin(), chosen.end());
    return data.select(chosen);
}

namespace {

ImageBatch load_cifar_files(const std::vector<std::filesystem::path>& files) {
    std::vector<float> pixels;
    std::vector<int> labels;
    for (const auto& file : files) read_cifar_bin(file, pixels, labels);
    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    ImageBatch batch(n, kCifarSize, kCifarSize, 3);
    std::copy(pixels.begin(), pixels.end(), batch.pixels.data());
    batch.labels = std::move(labels);
    return batch;
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset out;

    if (spec.name == "synth10") {
        Rng root(spec.seed);
        Rng train_rng = root.child(0);
        Rng test_rng = root.child(1);
        out.train = make_synth10(spec.train_count, train_rng);
        out.test = make_synth10(spec.test_count, test_rng);
        out.class_names.reserve(10);
        for (int k = 0; k < 10; ++k) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "grating-%03d", k * 18);
            out.class_names.push_back(buf);
        }
        return out;
    }

    if (spec.name == "cifar10") {
        const std::filesystem::path root = cifar_root(spec);
        std::vector<std::filesystem::path> train_files;
        for (int b = 1; b <= 5; ++b) train_files.push_back(root / ("data_batch_" + std::to_string(b) + ".bin"));
        out.train = load_cifar_files(train_files);
        out.test = load_cifar_files({root / "test_batch.bin"});
        out.class_names.assign(std::begin(kCifarClasses), std::end(kCifarClasses));
    } else {
        const std::filesystem::path root = spec.path;
        std::vector<std::string> test_classes;
        out.train = load_image_folder(root / "train", spec.image_size, out.class_names, out.skipped);
        int test_skipped = 0;
        out.test = load_image_folder(root / "test", spec.image_size, test_classes, test_skipped);
        out.skipped += test_skipped;
        if (test_classes != out.class_names)
            throw IoError("train and test splits under " + root.string() + " list different classes");
    }

    Rng root(spec.seed);
    if (spec.train_count > 0) out.train = subsample(out.train, spec.train_count, root.child(2).seed());
    if (spec.test_count > 0) out.test = subsample(out.test, spec.test_count, root.child(3).seed());
    return out;
}

}  // namespace denim
