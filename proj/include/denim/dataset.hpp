#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "denim/image.hpp"
#include "denim/rng.hpp"

namespace denim {

// Where a dataset comes from and how much of it to load. `name` selects the
// source: "synth10" generates the procedural 10-class benchmark, "cifar10"
// reads the standard binary batches, "folder" ingests an image directory
// tree. A count of 0 means all available items.
struct DatasetSpec {
    std::string name = "synth10";
    std::string path;
    int train_count = 2000;
    int test_count = 1000;
    int image_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;

    bool operator==(const DatasetSpec&) const = default;
};

// Loaded train/test splits with class names and the number of unreadable
// files that were skipped during ingestion.
struct Dataset {
    ImageBatch train;
    ImageBatch test;
    std::vector<std::string> class_names;
    int skipped = 0;
};

Dataset load_dataset(const DatasetSpec& spec);

// The procedural benchmark: class k is an oriented sinusoidal grating at
// angle k*18 degrees with per-sample random frequency, phase, amplitude, a
// random color wash, and pixel noise. Labels cycle 0..9 so every prefix is
// nearly class-balanced.
ImageBatch make_synth10(std::int64_t count, Rng& rng);

// One CIFAR-style binary file: records of 1 label byte + 3072 pixel bytes
// in planar RGB. Appends [0,1] channel-last pixels and labels to the
// output vectors.
void read_cifar_bin(const std::filesystem::path& file, std::vector<float>& pixels, std::vector<int>& labels);

// Directory tree `root/<class>/<image files>`, classes in sorted name
// order. Unreadable files are skipped and counted. Images are resized to
// image_size and converted to RGB in [0,1].
ImageBatch load_image_folder(const std::filesystem::path& root, int image_size,
                             std::vector<std::string>& class_names, int& skipped);

// `count` items drawn without replacement, in ascending original order.
// The same seed always selects the same indices.
ImageBatch subsample(const ImageBatch& data, std::int64_t count, std::uint64_t seed);

}  // namespace denim
