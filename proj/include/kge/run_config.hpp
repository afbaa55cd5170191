#pragma once

#include "kge/graph_store.hpp"
#include "kge/model.hpp"
#include "kge/training.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace kge {

using KeyValues = std::map<std::string, std::string>;

struct RunConfig {
  std::string dataset = "umls";
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "runs";
  bool add_inverse_relations = false;
  ModelConfig model;
  TrainConfig train;
};

/// Every field as `key -> value`; round-trips through from_kv.
KeyValues to_kv(const RunConfig& config);
/// Overlays `kv` onto `base`. Unknown keys and malformed values raise ConfigError.
RunConfig from_kv(const KeyValues& kv, RunConfig base = {});

/// `key = value` lines, `#` starts a comment.
KeyValues read_config_file(const std::filesystem::path& path);
void write_config_file(const std::filesystem::path& path, const RunConfig& config);

/// Hyperparameters used for the reported runs of each dataset and model kind;
/// only the keys that differ from the struct defaults are returned.
KeyValues recommended_settings(const std::string& dataset, ModelKind kind, bool frozen, bool self_loop);

/// `KGE_DATA_DIR` when set, otherwise the bundled data directory.
std::filesystem::path default_data_dir();

/// Known names: countries_s1, umls, fb15k-237, federal-states,
/// synthetic-broodwar-like. Anything else is read as a dataset directory.
KnowledgeGraph resolve_dataset(const std::string& name, const std::filesystem::path& data_dir,
                               KnowledgeGraphOptions options = {});

}  // namespace kge
