#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "denim/vit.hpp"

namespace denim {

// Free-form training metadata carried inside every checkpoint so downstream
// stages can verify what they are loading (objective, degradation, dataset,
// epochs, seed, config hash, ...).
using Provenance = std::map<std::string, std::string>;

// Encoder/decoder pair from pretraining plus the optional classifier added
// by fine-tuning. The unit every pipeline stage reads and writes.
struct ModelBundle {
    ArchConfig arch;
    EncoderNet encoder;
    DecoderNet decoder;
    std::optional<ClassifierNet> classifier;
    Provenance provenance;

    ModelBundle() = default;
    explicit ModelBundle(const ArchConfig& a);

    // Adds a freshly constructed classifier (encoder weights copied from the
    // pretrained encoder, new head).
    void attach_classifier();

    // Encoder + decoder (+ classifier when present), in serialization order.
    ParamRefs params();

    std::int64_t num_params();
};

// Fresh bundle with all weights initialized from the seed.
ModelBundle make_bundle(const ArchConfig& arch, std::uint64_t seed);

// Total trainable scalar count of encoder + decoder, as a pure function of
// the architecture.
std::int64_t pretrain_param_count(const ArchConfig& arch);

// Binary checkpoint: magic, length-prefixed JSON header describing the
// architecture, provenance, and tensor table, then raw float32 data.
// Round-trips bit-exactly. Takes the bundle mutably only to enumerate
// parameter pointers; the weights are not modified.
void save_bundle(ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

// Header-only read (arch + provenance + classifier flag) without the weights.
struct BundleInfo {
    ArchConfig arch;
    Provenance provenance;
    bool has_classifier = false;
    std::int64_t num_tensors = 0;
};
BundleInfo peek_bundle(const std::filesystem::path& path);

}  // namespace denim
