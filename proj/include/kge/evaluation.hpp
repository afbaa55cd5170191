#pragma once

#include "kge/graph_store.hpp"
#include "kge/model.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kge {

/// Known true triples used to filter competing candidates.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const KnowledgeGraph& kg);
  void add(const Triple& t);

  /// Entities o with (s, p, o) known, or s with (s, p, o) known, depending on side.
  std::span<const EntityId> known(const Triple& query, Side side) const;
  std::size_t size() const { return size_; }

 private:
  std::unordered_map<std::int64_t, std::vector<EntityId>> objects_, subjects_;
  std::size_t size_ = 0;
};

/// 1 + #better + #tied / 2 among candidates not in `filtered` (the truth is
/// never filtered).
double realistic_rank(const Vector& scores, EntityId truth, std::span<const EntityId> filtered,
                      Orientation orientation);

struct QueryRank {
  Triple triple;
  Side side;
  double rank;
};

struct RankingReport {
  std::string model;
  Split split = Split::Test;
  std::size_t filter_size = 0;
  std::vector<QueryRank> queries;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
};

/// Recomputes the aggregates of `report` from its queries.
void summarize(RankingReport& report);

double rank_query(const Model& model, const Matrix& encoded, const Triple& t, Side side, const FilterIndex& filter);

/// Subject- and object-side queries for every triple of `split`.
RankingReport evaluate_split(Model& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                             int threads = 1);
RankingReport evaluate_split(Model& model, const KnowledgeGraph& kg, Split split, int threads = 1);
RankingReport evaluate_triples(const Model& model, const Matrix& encoded, std::span<const Triple> triples,
                               const FilterIndex& filter, int threads = 1);

/// Human-readable table with one row per report.
std::string format_reports(std::span<const RankingReport> reports);
/// One line per query then the aggregates, tab-separated.
void write_report(const std::filesystem::path& path, const RankingReport& report, const KnowledgeGraph& kg);

/// Columns of `points` projected onto their top `k` principal directions
/// (k × n). The first nonzero loading of each direction is positive; missing
/// directions are padded with zeros.
Matrix pca_project(const Matrix& points, int k = 2);

/// Candidates ranked by the decoder for (new node, relation, e), best first.
std::vector<std::pair<EntityId, double>> neighbor_suggestions(const Model& model, const Matrix& encoded,
                                                              const Vector& new_embedding, RelationId relation,
                                                              std::size_t k);

}  // namespace kge
