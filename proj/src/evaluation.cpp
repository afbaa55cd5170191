#include "kge/evaluation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace kge {

namespace {
std::int64_t key(std::int32_t a, std::int32_t b) {
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}
}  // namespace

FilterIndex::FilterIndex(const KnowledgeGraph& kg) {
  for (auto split : {Split::Train, Split::Valid, Split::Test}) {
    for (const auto& t : kg.split(split)) add(t);
  }
}

void FilterIndex::add(const Triple& t) {
  auto& objs = objects_[key(t.subject, t.predicate)];
  if (std::find(objs.begin(), objs.end(), t.object) != objs.end()) return;
  objs.push_back(t.object);
  subjects_[key(t.predicate, t.object)].push_back(t.subject);
  ++size_;
}

std::span<const EntityId> FilterIndex::known(const Triple& query, Side side) const {
  const auto& map = side == Side::Object ? objects_ : subjects_;
  const auto k = side == Side::Object ? key(query.subject, query.predicate) : key(query.predicate, query.object);
  auto it = map.find(k);
  if (it == map.end()) return {};
  return it->second;
}

double realistic_rank(const Vector& scores, EntityId truth, std::span<const EntityId> filtered,
                      Orientation orientation) {
  const double s = scores(truth);
  const bool lower = orientation == Orientation::LowerIsBetter;
  std::size_t better = 0, tied = 0;
  for (Index e = 0; e < scores.size(); ++e) {
    if (e == truth) continue;
    const double c = scores(e);
    if (lower ? c < s : c > s) {
      ++better;
    } else if (c == s) {
      ++tied;
    }
  }
  for (EntityId f : filtered) {
    if (f == truth) continue;
    const double c = scores(f);
    if (lower ? c < s : c > s) {
      --better;
    } else if (c == s) {
      --tied;
    }
  }
  return 1.0 + static_cast<double>(better) + static_cast<double>(tied) / 2.0;
}

void summarize(RankingReport& report) {
  report.mrr = report.hits1 = report.hits3 = 0.0;
  if (report.queries.empty()) return;
  for (const auto& q : report.queries) {
    report.mrr += 1.0 / q.rank;
    report.hits1 += q.rank <= 1.0 ? 1.0 : 0.0;
    report.hits3 += q.rank <= 3.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(report.queries.size());
  report.mrr /= n;
  report.hits1 /= n;
  report.hits3 /= n;
}

double rank_query(const Model& model, const Matrix& encoded, const Triple& t, Side side, const FilterIndex& filter) {
  const Vector scores = model.score_candidates(encoded, t, side);
  const EntityId truth = side == Side::Object ? t.object : t.subject;
  return realistic_rank(scores, truth, filter.known(t, side), model.orientation());
}

RankingReport evaluate_triples(const Model& model, const Matrix& encoded, std::span<const Triple> triples,
                               const FilterIndex& filter, int threads) {
  RankingReport report;
  report.model = to_string(model.config().kind);
  report.filter_size = filter.size();
  report.queries.resize(2 * triples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = triples[i];
      report.queries[2 * i] = {t, Side::Subject, rank_query(model, encoded, t, Side::Subject, filter)};
      report.queries[2 * i + 1] = {t, Side::Object, rank_query(model, encoded, t, Side::Object, filter)};
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
  if (n_threads == 1 || triples.size() < 64) {
    work(0, triples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (triples.size() + n_threads - 1) / n_threads;
    for (std::size_t b = 0; b < triples.size(); b += chunk) pool.emplace_back(work, b, std::min(triples.size(), b + chunk));
    for (auto& th : pool) th.join();
  }
  summarize(report);
  return report;
}

RankingReport evaluate_split(Model& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                             int threads) {
  const Matrix encoded = model.encode_all();
  auto report = evaluate_triples(model, encoded, kg.split(split), filter, threads);
  report.split = split;
  return report;
}

RankingReport evaluate_split(Model& model, const KnowledgeGraph& kg, Split split, int threads) {
  return evaluate_split(model, kg, split, FilterIndex(kg), threads);
}

std::string format_reports(std::span<const RankingReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "split" << std::setw(16) << "model" << std::right << std::setw(8) << "MRR"
      << std::setw(8) << "H@1" << std::setw(8) << "H@3" << std::setw(9) << "queries" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    out << std::left << std::setw(8) << to_string(r.split) << std::setw(16) << r.model << std::right << std::setw(8)
        << r.mrr << std::setw(8) << r.hits1 << std::setw(8) << r.hits3 << std::setw(9) << r.queries.size() << '\n';
  }
  return out.str();
}

void write_report(const std::filesystem::path& path, const RankingReport& report, const KnowledgeGraph& kg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "subject\tpredicate\tobject\tside\trank\n";
  out << std::setprecision(10);
  for (const auto& q : report.queries) {
    out << kg.entities().name(q.triple.subject) << '\t' << kg.relations().name(q.triple.predicate) << '\t'
        << kg.entities().name(q.triple.object) << '\t' << (q.side == Side::Subject ? "subject" : "object") << '\t'
        << q.rank << '\n';
  }
  out << "# model=" << report.model << " split=" << to_string(report.split) << " filter=" << report.filter_size
      << " mrr=" << report.mrr << " hits1=" << report.hits1 << " hits3=" << report.hits3 << '\n';
}

Matrix pca_project(const Matrix& points, int k) {
  if (k < 1) throw std::invalid_argument("pca_project: k must be positive");
  const Index n = points.cols();
  Matrix out = Matrix::Zero(k, n);
  if (n == 0) return out;
  const Vector mean = points.rowwise().mean();
  const Matrix centered = points.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  const Vector& values = solver.eigenvalues();
  const Matrix& vectors = solver.eigenvectors();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  for (int c = 0; c < k && c < points.rows(); ++c) {
    const Index idx = points.rows() - 1 - c;
    if (values(idx) <= 1e-12 * scale) break;
    Vector dir = vectors.col(idx);
    for (Index i = 0; i < dir.size(); ++i) {
      if (std::abs(dir(i)) > 1e-12) {
        if (dir(i) < 0) dir = -dir;
        break;
      }
    }
    out.row(c) = dir.transpose() * centered;
  }
  return out;
}

std::vector<std::pair<EntityId, double>> neighbor_suggestions(const Model& model, const Matrix& encoded,
                                                              const Vector& new_embedding, RelationId relation,
                                                              std::size_t k) {
  const Vector scores = model.score_against(new_embedding, relation, encoded);
  std::vector<std::pair<EntityId, double>> out;
  out.reserve(static_cast<std::size_t>(scores.size()));
  for (Index e = 0; e < scores.size(); ++e) out.emplace_back(static_cast<EntityId>(e), scores(e));
  const bool lower = model.orientation() == Orientation::LowerIsBetter;
  std::stable_sort(out.begin(), out.end(), [lower](const auto& a, const auto& b) {
    return lower ? a.second < b.second : a.second > b.second;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace kge
