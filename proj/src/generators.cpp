#include "kge/graph_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

namespace kge {

namespace {

// Fisher-Yates with an explicit bounded draw so the result does not depend on
// the standard library's shuffle implementation.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// Moves `n_valid + n_test` triples out of `pool` such that every entity keeps
// at least one training edge whenever possible.
void split_holdout(TripleList pool, std::size_t n_valid, std::size_t n_test, Rng& rng, TripleList& train,
                   TripleList& valid, TripleList& test) {
  shuffle(pool, rng);
  std::map<EntityId, int> degree;
  for (const auto& t : pool) {
    ++degree[t.subject];
    ++degree[t.object];
  }
  const std::size_t want = n_valid + n_test;
  std::vector<bool> held(pool.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pool.size() && order.size() < want; ++i) {
    const auto& t = pool[i];
    const int need_s = t.subject == t.object ? 3 : 2;
    if (degree[t.subject] >= need_s && degree[t.object] >= 2) {
      --degree[t.subject];
      --degree[t.object];
      held[i] = true;
      order.push_back(i);
    }
  }
  for (std::size_t i = 0; i < pool.size() && order.size() < want; ++i) {
    if (!held[i]) {
      held[i] = true;
      order.push_back(i);
    }
  }
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_valid ? valid : test).push_back(pool[order[k]]);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!held[i]) train.push_back(pool[i]);
  }
}

}  // namespace

KnowledgeGraph gen_federal_states() {
  static constexpr std::array<const char*, 16> states = {
      "baden-wuerttemberg", "bavaria",  "berlin",          "brandenburg",
      "bremen",             "hamburg",  "hesse",           "mecklenburg-vorpommern",
      "lower-saxony",       "north-rhine-westphalia", "rhineland-palatinate", "saarland",
      "saxony",             "saxony-anhalt", "schleswig-holstein", "thuringia"};
  using Pair = std::pair<const char*, const char*>;
  static constexpr std::array<Pair, 29> state_borders = {{
      {"baden-wuerttemberg", "bavaria"},
      {"baden-wuerttemberg", "hesse"},
      {"baden-wuerttemberg", "rhineland-palatinate"},
      {"bavaria", "hesse"},
      {"bavaria", "thuringia"},
      {"bavaria", "saxony"},
      {"berlin", "brandenburg"},
      {"brandenburg", "mecklenburg-vorpommern"},
      {"brandenburg", "lower-saxony"},
      {"brandenburg", "saxony-anhalt"},
      {"brandenburg", "saxony"},
      {"bremen", "lower-saxony"},
      {"hamburg", "lower-saxony"},
      {"hamburg", "schleswig-holstein"},
      {"hesse", "thuringia"},
      {"hesse", "lower-saxony"},
      {"hesse", "north-rhine-westphalia"},
      {"hesse", "rhineland-palatinate"},
      {"mecklenburg-vorpommern", "lower-saxony"},
      {"mecklenburg-vorpommern", "schleswig-holstein"},
      {"lower-saxony", "schleswig-holstein"},
      {"lower-saxony", "saxony-anhalt"},
      {"lower-saxony", "thuringia"},
      {"lower-saxony", "north-rhine-westphalia"},
      {"north-rhine-westphalia", "rhineland-palatinate"},
      {"rhineland-palatinate", "saarland"},
      {"saxony", "thuringia"},
      {"saxony", "saxony-anhalt"},
      {"saxony-anhalt", "thuringia"},
  }};
  static constexpr std::array<Pair, 17> foreign_borders = {{
      {"baden-wuerttemberg", "france"},
      {"baden-wuerttemberg", "switzerland"},
      {"bavaria", "austria"},
      {"bavaria", "czech-republic"},
      {"saxony", "czech-republic"},
      {"saxony", "poland"},
      {"brandenburg", "poland"},
      {"mecklenburg-vorpommern", "poland"},
      {"schleswig-holstein", "denmark"},
      {"lower-saxony", "netherlands"},
      {"north-rhine-westphalia", "netherlands"},
      {"north-rhine-westphalia", "belgium"},
      {"rhineland-palatinate", "france"},
      {"rhineland-palatinate", "luxembourg"},
      {"rhineland-palatinate", "belgium"},
      {"saarland", "france"},
      {"saarland", "luxembourg"},
  }};
  static constexpr std::array<const char*, 7> in_europe = {"germany",    "austria", "switzerland", "france",
                                                           "luxembourg", "belgium", "netherlands"};

  Dictionary entities, relations;
  for (const char* s : states) entities.intern(s);
  for (const char* c : {"germany", "europe", "austria", "switzerland", "france", "luxembourg", "belgium",
                        "netherlands", "denmark", "poland", "czech-republic"}) {
    entities.intern(c);
  }
  const auto neighbor_of = relations.intern("neighborOf");
  const auto located_in = relations.intern("locatedIn");

  TripleList all;
  auto both_ways = [&](const Pair& p) {
    const auto a = entities.at(p.first), b = entities.at(p.second);
    all.push_back({a, neighbor_of, b});
    all.push_back({b, neighbor_of, a});
  };
  for (const auto& p : state_borders) both_ways(p);
  for (const auto& p : foreign_borders) both_ways(p);
  const auto germany = entities.at("germany");
  const auto europe = entities.at("europe");
  for (const char* s : states) all.push_back({entities.at(s), located_in, germany});
  for (const char* c : in_europe) all.push_back({entities.at(c), located_in, europe});

  // Held-out triples are stratified by relation so that both relations
  // appear in valid and test in proportion to their frequency.
  Rng rng(2021);
  TripleList train, valid, test;
  TripleList located, neighbors;
  for (const auto& t : all) (t.predicate == located_in ? located : neighbors).push_back(t);
  const std::size_t n_held = 10;
  const auto n_located = static_cast<std::size_t>(
      std::lround(static_cast<double>(n_held * located.size()) / static_cast<double>(all.size())));
  split_holdout(std::move(located), n_located, n_located, rng, train, valid, test);
  split_holdout(std::move(neighbors), n_held - n_located, n_held - n_located, rng, train, valid, test);
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                        std::move(test));
}

KnowledgeGraph gen_small_kg(std::int32_t n_entities, std::int32_t n_relations, std::size_t n_train,
                            std::size_t n_valid, std::size_t n_test, std::uint64_t seed) {
  if (n_entities < 2 || n_relations < 1) throw ConfigError("need at least 2 entities and 1 relation");
  const std::size_t total = n_train + n_valid + n_test;
  const auto capacity = static_cast<std::size_t>(n_entities) * static_cast<std::size_t>(n_entities - 1) *
                        static_cast<std::size_t>(n_relations);
  if (total > capacity) {
    throw ConfigError("cannot draw " + std::to_string(total) + " distinct triples over " +
                      std::to_string(n_entities) + " entities and " + std::to_string(n_relations) + " relations");
  }
  if (n_train == 0) throw ConfigError("training split must be nonempty");

  Rng rng(seed);
  const std::int32_t n_types = std::clamp(n_entities / 8, 2, 6);
  const std::int32_t n_clusters = std::max(2, n_entities / (2 * n_types));

  std::vector<std::int32_t> type(static_cast<std::size_t>(n_entities));
  std::vector<std::int32_t> cluster(static_cast<std::size_t>(n_entities));
  for (std::int32_t e = 0; e < n_entities; ++e) {
    type[static_cast<std::size_t>(e)] = e % n_types;
    cluster[static_cast<std::size_t>(e)] = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(n_clusters));
  }
  struct Signature {
    std::int32_t from, to, shift;
  };
  std::vector<Signature> sig(static_cast<std::size_t>(n_relations));
  for (auto& s : sig) {
    s.from = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(n_types));
    s.to = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(n_types));
    s.shift = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(n_clusters));
  }

  // Candidate tiers: the latent rule, then type-compatible pairs, then anything.
  TripleList tiers[3];
  for (std::int32_t r = 0; r < n_relations; ++r) {
    const auto& s = sig[static_cast<std::size_t>(r)];
    for (std::int32_t a = 0; a < n_entities; ++a) {
      for (std::int32_t b = 0; b < n_entities; ++b) {
        if (a == b) continue;
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        const bool typed = type[ua] == s.from && type[ub] == s.to;
        const bool rule = typed && (cluster[ua] + s.shift) % n_clusters == cluster[ub];
        tiers[rule ? 0 : typed ? 1 : 2].push_back({a, r, b});
      }
    }
  }
  TripleList chosen;
  for (auto& tier : tiers) {
    shuffle(tier, rng);
    for (const auto& t : tier) {
      if (chosen.size() == total) break;
      chosen.push_back(t);
    }
  }

  Dictionary entities, relations;
  for (std::int32_t e = 0; e < n_entities; ++e) {
    entities.intern("type" + std::to_string(type[static_cast<std::size_t>(e)]) + "_unit" + std::to_string(e));
  }
  for (std::int32_t r = 0; r < n_relations; ++r) relations.intern("rel" + std::to_string(r));

  TripleList train, valid, test;
  split_holdout(std::move(chosen), n_valid, n_test, rng, train, valid, test);
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                        std::move(test));
}

}  // namespace kge
