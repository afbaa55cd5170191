#include "kge/graph_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace kge {

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "valid" || name == "eval" || name == "validation") return Split::Valid;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "'");
}

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line(line) {}

// ---------------------------------------------------------------- Dictionary

std::int32_t Dictionary::intern(std::string_view name) {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  if (frozen_) throw VocabularyError("unknown name '" + std::string(name) + "'");
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::int32_t> Dictionary::find(std::string_view name) const {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::int32_t Dictionary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw VocabularyError("unknown name '" + std::string(name) + "'");
}

void Dictionary::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < names_.size(); ++i) out << i << '\t' << names_[i] << '\n';
}

Dictionary Dictionary::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Dictionary dict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), lineno, "expected id<TAB>surface");
    std::int32_t id = 0;
    try {
      id = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
      throw ParseError(path.string(), lineno, "bad id");
    }
    if (id != dict.size()) throw ParseError(path.string(), lineno, "ids must be dense and ordered");
    dict.intern(std::string_view(line).substr(tab + 1));
  }
  dict.freeze();
  return dict;
}

// ------------------------------------------------------------- NeighborIndex

namespace {
std::int64_t group_key(EntityId e, RelationId r, std::int32_t num_relations) {
  return static_cast<std::int64_t>(e) * num_relations + r;
}
}  // namespace

NeighborIndex NeighborIndex::build(std::span<const Triple> train, std::int32_t num_entities,
                                   std::int32_t num_relations, bool add_inverse) {
  NeighborIndex index;
  index.num_entities_ = num_entities;
  index.num_relations_ = add_inverse ? 2 * num_relations : num_relations;

  std::vector<Triple> edges(train.begin(), train.end());
  if (add_inverse) {
    for (const auto& t : train) edges.push_back({t.object, t.predicate + num_relations, t.subject});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  index.entity_offset_.assign(static_cast<std::size_t>(num_entities) + 1, 0);
  index.objects_.reserve(edges.size());
  std::size_t e = 0;
  for (EntityId i = 0; i < num_entities; ++i) {
    index.entity_offset_[static_cast<std::size_t>(i)] = index.group_relation_.size();
    while (e < edges.size() && edges[e].subject == i) {
      const RelationId p = edges[e].predicate;
      index.lookup_.emplace(group_key(i, p, index.num_relations_), index.group_relation_.size());
      index.group_relation_.push_back(p);
      index.group_offset_.push_back(index.objects_.size());
      while (e < edges.size() && edges[e].subject == i && edges[e].predicate == p) {
        index.objects_.push_back(edges[e].object);
        ++e;
      }
    }
  }
  index.entity_offset_.back() = index.group_relation_.size();
  index.group_offset_.push_back(index.objects_.size());
  return index;
}

std::span<const EntityId> NeighborIndex::neighbors(EntityId entity, RelationId relation) const {
  auto it = lookup_.find(group_key(entity, relation, num_relations_));
  if (it == lookup_.end()) return {};
  const auto g = it->second;
  return {objects_.data() + group_offset_[g], group_offset_[g + 1] - group_offset_[g]};
}

std::vector<NeighborIndex::Group> NeighborIndex::groups(EntityId entity) const {
  std::vector<Group> out;
  if (entity < 0 || entity >= num_entities_) return out;
  const auto begin = entity_offset_[static_cast<std::size_t>(entity)];
  const auto end = entity_offset_[static_cast<std::size_t>(entity) + 1];
  out.reserve(end - begin);
  for (auto g = begin; g < end; ++g) {
    out.push_back({group_relation_[g],
                   {objects_.data() + group_offset_[g], group_offset_[g + 1] - group_offset_[g]}});
  }
  return out;
}

std::size_t NeighborIndex::group_count(EntityId entity) const {
  if (entity < 0 || entity >= num_entities_) return 0;
  return entity_offset_[static_cast<std::size_t>(entity) + 1] - entity_offset_[static_cast<std::size_t>(entity)];
}

bool NeighborIndex::operator==(const NeighborIndex& other) const {
  return num_entities_ == other.num_entities_ && num_relations_ == other.num_relations_ &&
         entity_offset_ == other.entity_offset_ && group_relation_ == other.group_relation_ &&
         group_offset_ == other.group_offset_ && objects_ == other.objects_;
}

// ------------------------------------------------------------ KnowledgeGraph

KnowledgeGraph::KnowledgeGraph(Dictionary entities, Dictionary relations, TripleList train,
                               TripleList valid, TripleList test, KnowledgeGraphOptions options)
    : entities_(std::move(entities)),
      relations_(std::move(relations)),
      train_(std::move(train)),
      valid_(std::move(valid)),
      test_(std::move(test)),
      options_(options) {
  entities_.freeze();
  relations_.freeze();
  for (const auto* split : {&train_, &valid_, &test_}) {
    for (const auto& t : *split) {
      if (t.subject < 0 || t.subject >= num_entities() || t.object < 0 || t.object >= num_entities() ||
          t.predicate < 0 || t.predicate >= num_relations()) {
        throw VocabularyError("triple id out of range");
      }
    }
  }
  neighbors_ = NeighborIndex::build(train_, num_entities(), num_relations(), options_.add_inverse_relations);
}

const TripleList& KnowledgeGraph::split(Split which) const {
  switch (which) {
    case Split::Train: return train_;
    case Split::Valid: return valid_;
    case Split::Test: return test_;
  }
  return train_;
}

Triple KnowledgeGraph::triple(std::string_view s, std::string_view p, std::string_view o) const {
  return {entities_.at(s), relations_.at(p), entities_.at(o)};
}

std::string KnowledgeGraph::format(const Triple& t) const {
  return entities_.name(t.subject) + " " + relations_.name(t.predicate) + " " + entities_.name(t.object);
}

// ------------------------------------------------------------------- file IO

TripleList load_tsv(const std::filesystem::path& path, Dictionary& entities, Dictionary& relations) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  TripleList out;
  std::set<Triple> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view view(line);
    std::string_view fields[3];
    std::size_t count = 0, start = 0;
    for (;;) {
      const auto tab = view.find('\t', start);
      const auto field = view.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3) {
      throw ParseError(path.string(), lineno, "expected 3 tab-separated fields, got " + std::to_string(count));
    }
    Triple t;
    try {
      t.subject = entities.intern(fields[0]);
      t.predicate = relations.intern(fields[1]);
      t.object = entities.intern(fields[2]);
    } catch (const VocabularyError& e) {
      throw VocabularyError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

void write_tsv(const std::filesystem::path& path, std::span<const Triple> triples, const Dictionary& entities,
               const Dictionary& relations) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : triples) {
    out << entities.name(t.subject) << '\t' << relations.name(t.predicate) << '\t' << entities.name(t.object)
        << '\n';
  }
}

namespace {
std::filesystem::path split_file(const std::filesystem::path& dir, const char* split) {
  for (const char* ext : {".tsv", ".txt"}) {
    auto p = dir / (std::string(split) + ext);
    if (std::filesystem::exists(p)) return p;
  }
  throw ConfigError("dataset directory " + dir.string() + " has no " + split + ".tsv");
}
}  // namespace

KnowledgeGraph load_dataset(const std::filesystem::path& dir, KnowledgeGraphOptions options) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
  Dictionary entities, relations;
  const auto ent_dict = dir / "entities.dict";
  const auto rel_dict = dir / "relations.dict";
  if (std::filesystem::exists(ent_dict) && std::filesystem::exists(rel_dict)) {
    entities = Dictionary::read(ent_dict);
    relations = Dictionary::read(rel_dict);
  }
  auto train = load_tsv(split_file(dir, "train"), entities, relations);
  entities.freeze();
  relations.freeze();
  auto valid = load_tsv(split_file(dir, "valid"), entities, relations);
  auto test = load_tsv(split_file(dir, "test"), entities, relations);
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                        std::move(test), options);
}

void write_dataset(const std::filesystem::path& dir, const KnowledgeGraph& kg) {
  std::filesystem::create_directories(dir);
  write_tsv(dir / "train.tsv", kg.train(), kg.entities(), kg.relations());
  write_tsv(dir / "valid.tsv", kg.valid(), kg.entities(), kg.relations());
  write_tsv(dir / "test.tsv", kg.test(), kg.entities(), kg.relations());
  kg.entities().write(dir / "entities.dict");
  kg.relations().write(dir / "relations.dict");
}

DatasetStats stats(const KnowledgeGraph& kg) {
  return {kg.num_entities(), kg.num_relations(), kg.train().size(), kg.valid().size(), kg.test().size()};
}

}  // namespace kge
