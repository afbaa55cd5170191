#pragma once

#include "kge/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kge {

using TripleList = std::vector<Triple>;

/// Bijection between surface strings and dense ids. Case-sensitive.
class Dictionary {
 public:
  /// Returns the id of `name`, minting a new one unless the dictionary is frozen.
  std::int32_t intern(std::string_view name);
  std::optional<std::int32_t> find(std::string_view name) const;
  /// Throws VocabularyError for unknown names.
  std::int32_t at(std::string_view name) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  /// `id<TAB>surface` per line.
  void write(const std::filesystem::path& path) const;
  static Dictionary read(const std::filesystem::path& path);

  bool operator==(const Dictionary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
  bool frozen_ = false;
};

/// Outgoing neighbourhoods N_i^p of the training graph, grouped per entity and
/// relation. Objects inside a group are sorted and distinct.
class NeighborIndex {
 public:
  struct Group {
    RelationId relation;
    std::span<const EntityId> objects;
  };

  NeighborIndex() = default;

  /// With `add_inverse`, every (s,p,o) also contributes o -> s under relation
  /// p + num_relations.
  static NeighborIndex build(std::span<const Triple> train, std::int32_t num_entities,
                             std::int32_t num_relations, bool add_inverse = false);

  std::span<const EntityId> neighbors(EntityId entity, RelationId relation) const;
  std::size_t degree(EntityId entity, RelationId relation) const { return neighbors(entity, relation).size(); }
  /// All non-empty groups of `entity`, ordered by relation id.
  std::vector<Group> groups(EntityId entity) const;
  std::size_t group_count(EntityId entity) const;

  std::int32_t num_entities() const { return num_entities_; }
  /// Relation count seen by the encoder (doubled with inverse relations).
  std::int32_t num_relations() const { return num_relations_; }
  std::size_t num_groups() const { return group_relation_.size(); }
  bool empty() const { return group_relation_.empty(); }

  bool operator==(const NeighborIndex& other) const;

 private:
  std::int32_t num_entities_ = 0;
  std::int32_t num_relations_ = 0;
  // CSR over entities -> groups -> objects.
  std::vector<std::size_t> entity_offset_;
  std::vector<RelationId> group_relation_;
  std::vector<std::size_t> group_offset_;
  std::vector<EntityId> objects_;
  std::unordered_map<std::int64_t, std::size_t> lookup_;
};

struct KnowledgeGraphOptions {
  bool add_inverse_relations = false;
};

/// Immutable after construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(Dictionary entities, Dictionary relations, TripleList train, TripleList valid,
                 TripleList test, KnowledgeGraphOptions options = {});

  const Dictionary& entities() const { return entities_; }
  const Dictionary& relations() const { return relations_; }
  std::int32_t num_entities() const { return entities_.size(); }
  std::int32_t num_relations() const { return relations_.size(); }

  const TripleList& train() const { return train_; }
  const TripleList& valid() const { return valid_; }
  const TripleList& test() const { return test_; }
  const TripleList& split(Split which) const;
  std::size_t num_triples() const { return train_.size() + valid_.size() + test_.size(); }

  const NeighborIndex& neighbors() const { return neighbors_; }
  const KnowledgeGraphOptions& options() const { return options_; }

  Triple triple(std::string_view s, std::string_view p, std::string_view o) const;
  std::string format(const Triple& t) const;

 private:
  Dictionary entities_;
  Dictionary relations_;
  TripleList train_, valid_, test_;
  NeighborIndex neighbors_;
  KnowledgeGraphOptions options_;
};

/// Reads `subject<TAB>predicate<TAB>object` lines. Unknown names are minted
/// unless the dictionaries are frozen, in which case VocabularyError is thrown.
/// Duplicate lines are dropped.
TripleList load_tsv(const std::filesystem::path& path, Dictionary& entities, Dictionary& relations);
void write_tsv(const std::filesystem::path& path, std::span<const Triple> triples,
               const Dictionary& entities, const Dictionary& relations);

/// Loads `{train,valid,test}.{tsv,txt}` from `dir`. When `entities.dict` and
/// `relations.dict` exist they fix the vocabulary; otherwise ids are minted in
/// first-encounter order over the training split and frozen before valid/test.
KnowledgeGraph load_dataset(const std::filesystem::path& dir, KnowledgeGraphOptions options = {});
/// Writes the three splits plus both dictionary files.
void write_dataset(const std::filesystem::path& dir, const KnowledgeGraph& kg);

struct DatasetStats {
  std::int32_t entities, relations;
  std::size_t train, valid, test;
  auto operator<=>(const DatasetStats&) const = default;
};
DatasetStats stats(const KnowledgeGraph& kg);

/// German federal states: 27 entities, 2 relations, 95/10/10 triples.
KnowledgeGraph gen_federal_states();

/// Typed synthetic graph with the requested statistics. Throws ConfigError
/// when the counts cannot be met without duplicates.
KnowledgeGraph gen_small_kg(std::int32_t n_entities, std::int32_t n_relations, std::size_t n_train,
                            std::size_t n_valid, std::size_t n_test, std::uint64_t seed);

}  // namespace kge
