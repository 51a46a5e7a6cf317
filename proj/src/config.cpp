#include "denim/config.hpp"

#include "denim/artifact_io.hpp"
#include "denim/serde.hpp"

namespace denim {

void ExperimentConfig::validate() const {
    dataset.validate();
    arch.validate();
    pretrain.validate();
    finetune.validate();
    defense.validate();
    attack.validate();
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    try {
        return j.get<ExperimentConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    cfg.validate();
    const json j = cfg;
    write_json_file(path, j);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const json j = cfg;
    return hash_string(j.dump());
}

}  // namespace denim
