#pragma once

#include <filesystem>
#include <string>

#include "denim/attacks.hpp"
#include "denim/dataset.hpp"
#include "denim/defense.hpp"
#include "denim/finetune.hpp"
#include "denim/pretrain.hpp"
#include "denim/vit.hpp"

namespace denim {

// One experiment, fully specified. Loading fills defaults for absent
// sections, rejects unknown keys, and validates every field, so a config
// file on disk is always either exactly reproducible or loudly wrong.
struct ExperimentConfig {
    DatasetSpec dataset;
    ArchConfig arch;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    DefenseSpec defense;
    AttackConfig attack;
    std::string output_dir = "runs";
    std::uint64_t seed = 0;

    void validate() const;

    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

// Hash of the canonical serialized form, embedded in artifacts so results
// can be traced back to the exact configuration that produced them.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace denim
