#pragma once

#include <initializer_list>
#include <string_view>

#include "json.hpp"

#include "denim/attacks.hpp"
#include "denim/config.hpp"
#include "denim/dataset.hpp"
#include "denim/defense.hpp"
#include "denim/degradation.hpp"
#include "denim/finetune.hpp"
#include "denim/optim.hpp"
#include "denim/pretrain.hpp"
#include "denim/vit.hpp"

namespace denim {

using nlohmann::json;

// Throws ConfigError naming the first key of `j` (an object) that is not in
// `allowed`, qualified by `where`. Typos in config files fail loudly instead
// of silently falling back to defaults.
void check_known_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed);

// Fetch j[key] when present, else keep `field` at its current value.
template <typename T>
void read_opt(const json& j, const char* key, T& field) {
    if (j.contains(key)) j.at(key).get_to(field);
}

void to_json(json& j, const ArchConfig& a);
void from_json(const json& j, ArchConfig& a);

void to_json(json& j, const SigmaSpec& s);
void from_json(const json& j, SigmaSpec& s);

void to_json(json& j, const MaskSpec& m);
void from_json(const json& j, MaskSpec& m);

void to_json(json& j, const DegradationSpec& d);
void from_json(const json& j, DegradationSpec& d);

void to_json(json& j, const OptimConfig& o);
void from_json(const json& j, OptimConfig& o);

void to_json(json& j, const DefenseSpec& d);
void from_json(const json& j, DefenseSpec& d);

void to_json(json& j, const AttackConfig& a);
void from_json(const json& j, AttackConfig& a);

void to_json(json& j, const DatasetSpec& d);
void from_json(const json& j, DatasetSpec& d);

void to_json(json& j, const PretrainConfig& p);
void from_json(const json& j, PretrainConfig& p);

void to_json(json& j, const FinetuneConfig& f);
void from_json(const json& j, FinetuneConfig& f);

void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);

}  // namespace denim
