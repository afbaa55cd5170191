// kge: train, evaluate, benchmark and inspect knowledge graph embedding models.

#include "kge/bench.hpp"
#include "kge/evaluation.hpp"
#include "kge/run_config.hpp"
#include "kge/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace fs = std::filesystem;
using namespace kge;

namespace {

// Flags shared by every command that builds a model. Only flags that were
// given on the command line end up in the resolved config, so a config file
// can set the rest.
struct Common {
  std::string config_file;
  KeyValues flags;
  std::vector<std::string> sets;
};

void add_value(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(flag, [&c, key](const std::string& v) { c.flags[key] = v; }, help);
}

void add_switch(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const char* value,
                const std::string& help) {
  cmd->add_flag_callback(flag, [&c, key, value] { c.flags[key] = value; }, help);
}

void add_data_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
  add_value(cmd, c, "--dataset", "dataset", "registry name or dataset directory");
  add_value(cmd, c, "--data-dir", "data_dir", "root of the bundled datasets");
  add_value(cmd, c, "--output,-o", "output_dir", "output directory");
  add_value(cmd, c, "--seed", "seed", "random seed (default 42)");
  add_value(cmd, c, "--threads", "threads", "evaluation threads");
  add_switch(cmd, c, "--inverse-relations", "add_inverse_relations", "true", "add reversed edges to the neighbourhoods");
  cmd->add_option("--set", c.sets, "extra key=value overrides");
}

void add_model_options(CLI::App* cmd, Common& c) {
  add_value(cmd, c, "--model,-m", "model", "transe|distmult|rgcn-transe|rgcn-distmult|spike|hybrid|srgcn");
  add_value(cmd, c, "--dim,-d", "dim", "embedding size");
  add_switch(cmd, c, "--frozen", "frozen", "true", "keep the R-GCN weights at initialisation");
  add_switch(cmd, c, "--trained", "frozen", "false", "train the R-GCN weights");
  add_switch(cmd, c, "--self-loop", "self_loop", "true", "include the W0 self-connection");
  add_switch(cmd, c, "--no-self-loop", "self_loop", "false", "drop the W0 self-connection");
  add_value(cmd, c, "--layers", "layers", "number of R-GCN layers");
  add_value(cmd, c, "--activation", "activation", "identity|relu");
  add_value(cmd, c, "--dropout", "dropout", "dropout on the R-GCN pre-activation");
  add_value(cmd, c, "--l2", "l2_weight", "L2 weight");
  add_value(cmd, c, "--l2-mode", "l2_mode", "sum|mean");
  add_value(cmd, c, "--inputs", "inputs", "input neurons per population");
  add_value(cmd, c, "--tau", "tau", "synaptic time constant");
  add_value(cmd, c, "--u-th", "u_th", "firing threshold");
  add_value(cmd, c, "--delta", "spike_delta", "non-spike penalty weight");
}

void add_train_options(CLI::App* cmd, Common& c) {
  add_value(cmd, c, "--lr", "lr", "Adam learning rate");
  add_value(cmd, c, "--margin", "margin", "hinge margin");
  add_value(cmd, c, "--negatives,-k", "negatives", "corruptions per positive");
  add_value(cmd, c, "--batch-size", "batch_size", "positives per batch");
  add_value(cmd, c, "--epochs", "max_epochs", "training epochs");
  add_value(cmd, c, "--eval-every", "eval_every", "epochs between validation passes");
  add_value(cmd, c, "--subsample", "subsample", "fraction of entities kept per batch");
}

KeyValues overlay(KeyValues base, const KeyValues& top) {
  for (const auto& [k, v] : top) base[k] = v;
  return base;
}

KeyValues explicit_settings(const Common& c) {
  KeyValues kv;
  if (!c.config_file.empty()) kv = read_config_file(c.config_file);
  if (const char* v = std::getenv("KGE_OUTPUT_DIR"); v && *v) kv["output_dir"] = v;
  if (const char* v = std::getenv("KGE_THREADS"); v && *v) kv["threads"] = v;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return overlay(kv, c.flags);
}

// Defaults, then the recommended settings for the dataset and model, then the
// config file, environment and flags.
RunConfig resolve(const Common& c, int default_threads) {
  RunConfig base;
  base.train.threads = default_threads;
  const KeyValues given = explicit_settings(c);
  const RunConfig probe = from_kv(given, base);
  const KeyValues rec = recommended_settings(probe.dataset, probe.model.kind, probe.model.frozen, probe.model.self_loop);
  RunConfig out = from_kv(overlay(rec, given), base);
  if (out.data_dir.empty()) out.data_dir = default_data_dir();
  return out;
}

int all_cores() { return std::max(1u, std::thread::hardware_concurrency()); }

KnowledgeGraph load_graph(const RunConfig& rc) {
  return resolve_dataset(rc.dataset, rc.data_dir, KnowledgeGraphOptions{rc.add_inverse_relations});
}

void print_stats(const std::string& name, const KnowledgeGraph& kg) {
  const auto s = stats(kg);
  std::cout << "dataset " << name << ": " << s.entities << " entities, " << s.relations << " relations, " << s.train
            << "/" << s.valid << "/" << s.test << " train/valid/test\n";
}

KeyValues checkpoint_metadata(const RunConfig& rc, const KnowledgeGraph& kg) {
  KeyValues meta = to_kv(rc);
  meta["num_entities"] = std::to_string(kg.num_entities());
  meta["num_relations"] = std::to_string(kg.num_relations());
  return meta;
}

// Rebuilds the run configuration stored in a checkpoint, letting the caller
// point at a different data location or output directory.
RunConfig config_from_checkpoint(const Checkpoint& ckpt, const Common& c) {
  KeyValues stored = ckpt.metadata;
  stored.erase("num_entities");
  stored.erase("num_relations");
  KeyValues given = explicit_settings(c);
  for (const char* key : {"model", "dim", "frozen", "self_loop", "layers", "inputs"}) {
    if (given.count(key) && stored.count(key) && given[key] != stored[key]) {
      throw ConfigError(std::string("--") + key + " conflicts with the checkpoint");
    }
  }
  RunConfig rc = from_kv(overlay(stored, given));
  if (rc.data_dir.empty()) rc.data_dir = default_data_dir();
  return rc;
}

void check_vocabulary(const Checkpoint& ckpt, const KnowledgeGraph& kg) {
  auto expect = [&](const char* key, std::int32_t have) {
    const auto it = ckpt.metadata.find(key);
    if (it != ckpt.metadata.end() && it->second != std::to_string(have)) {
      throw VocabularyError(std::string("checkpoint was trained with ") + it->second + " " + (key + 4) +
                            " but the dataset has " + std::to_string(have));
    }
  };
  expect("num_entities", kg.num_entities());
  expect("num_relations", kg.num_relations());
}

void report_causality(Model& model) {
  if (auto* layer = model.srgcn_layer()) {
    model.encode_all();
    const auto [mean, sd] = layer->causal_fraction();
    std::cout << std::fixed << std::setprecision(2) << "causal spike fraction: " << 100 * mean << " +- "
              << 100 * sd << " %\n";
  }
}

// ---------------------------------------------------------------- commands

int cmd_train(const Common& c) {
  const RunConfig rc = resolve(c, all_cores());
  const KnowledgeGraph kg = load_graph(rc);
  print_stats(rc.dataset, kg);
  std::cout << "model " << to_string(rc.model.kind) << " d=" << rc.model.dim << " seed=" << rc.model.seed << '\n';

  fs::create_directories(rc.output_dir);
  write_config_file(rc.output_dir / "config.txt", rc);

  Model model(rc.model, kg);
  const auto fitted = fit(model, kg, rc.train, [](const EpochLog& e) {
    if (!std::isnan(e.valid_mrr)) {
      std::cout << "epoch " << e.epoch << " loss " << std::setprecision(5) << e.loss << " valid MRR " << e.valid_mrr
                << std::endl;
    }
  });
  write_log_csv(rc.output_dir / "log.csv", fitted.log);
  save_checkpoint(rc.output_dir / "model.ckpt", model.params(), checkpoint_metadata(rc, kg));

  auto report = evaluate_split(model, kg, Split::Valid, rc.train.threads);
  report.model = to_string(rc.model.kind);
  write_report(rc.output_dir / "report_valid.tsv", report, kg);
  std::cout << "best epoch " << fitted.best_epoch << '\n' << format_reports(std::span(&report, 1));
  report_causality(model);
  std::cout << "outputs in " << rc.output_dir.string() << " (seed " << rc.model.seed << ")\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::vector<std::string>& split_names) {
  std::vector<Split> splits;
  for (const auto& s : split_names) splits.push_back(parse_split(s));
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  RunConfig rc = config_from_checkpoint(ckpt, c);
  if (!c.flags.count("threads") && !std::getenv("KGE_THREADS")) rc.train.threads = all_cores();
  const KnowledgeGraph kg = load_graph(rc);
  check_vocabulary(ckpt, kg);

  Model model(rc.model, kg);
  restore_params(model.params(), ckpt);
  const FilterIndex filter(kg);
  std::vector<RankingReport> reports;
  fs::create_directories(rc.output_dir);
  for (Split s : splits) {
    auto r = evaluate_split(model, kg, s, filter, rc.train.threads);
    r.model = to_string(rc.model.kind);
    write_report(rc.output_dir / (std::string("report_") + to_string(s) + ".tsv"), r, kg);
    reports.push_back(std::move(r));
  }
  write_config_file(rc.output_dir / "config.txt", rc);
  std::cout << format_reports(reports);
  report_causality(model);
  std::cout << "seed " << rc.model.seed << '\n';
  return 0;
}

int cmd_bench(const Common& c, const std::vector<Index>& dims, int reps, int warmup) {
  Common local = c;
  if (!local.flags.count("model")) local.flags["model"] = "rgcn-transe";
  RunConfig rc = resolve(local, 1);
  const KnowledgeGraph kg = load_graph(rc);
  print_stats(rc.dataset, kg);
  BenchConfig bc;
  bc.model = rc.model;
  bc.dims = dims;
  bc.reps = reps;
  bc.warmup = warmup;
  bc.batch_size = rc.train.batch_size;
  bc.negatives = rc.train.negatives;
  bc.margin = rc.train.margin;
  bc.seed = rc.model.seed;
  bc.label = rc.dataset;
  const auto result = bench_backward(kg, bc);

  fs::create_directories(rc.output_dir);
  write_bench_csv(rc.output_dir / "bench.csv", result);
  write_speedup_csv(rc.output_dir / "speedup.csv", result);
  write_config_file(rc.output_dir / "config.txt", rc);
  std::cout << "     d   frozen_ms  trained_ms  speedup  mem_reduction\n" << std::fixed;
  for (const auto& row : result.rows) {
    std::cout << std::setw(6) << row.dim << std::setw(12) << std::setprecision(4) << row.frozen_ns * 1e-6
              << std::setw(12) << row.trained_ns * 1e-6 << std::setw(9) << std::setprecision(3) << row.speedup
              << std::setw(15) << row.memory_reduction << '\n';
  }
  std::cout << "outputs in " << rc.output_dir.string() << " (seed " << rc.model.seed << ")\n";
  return 0;
}

std::vector<std::pair<RelationId, EntityId>> parse_neighbors(const std::string& spec, const KnowledgeGraph& kg) {
  std::vector<std::pair<RelationId, EntityId>> out;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw ConfigError("neighbour spec needs entity:relation, got '" + item + "'");
    const auto e = kg.entities().find(item.substr(0, colon));
    const auto p = kg.relations().find(item.substr(colon + 1));
    if (!e) throw VocabularyError("unknown entity '" + item.substr(0, colon) + "'");
    if (!p) throw VocabularyError("unknown relation '" + item.substr(colon + 1) + "'");
    out.emplace_back(*p, *e);
  }
  if (out.empty()) throw ConfigError("--neighbors is empty");
  return out;
}

int cmd_inductive(const Common& c, const std::string& checkpoint, const std::string& neighbors, std::size_t top) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig rc = config_from_checkpoint(ckpt, c);
  if (!uses_rgcn(rc.model.kind) || rc.model.layers != 1) {
    throw ConfigError("inductive embedding needs a single-layer R-GCN model");
  }
  const KnowledgeGraph kg = load_graph(rc);
  check_vocabulary(ckpt, kg);
  Model model(rc.model, kg);
  restore_params(model.params(), ckpt);

  const auto nbrs = parse_neighbors(neighbors, kg);
  const Vector fresh = inductive_embed(*model.rgcn_layer(), *model.initial_embeddings(), nbrs);
  const Matrix encoded = model.encode_all();

  Matrix points(encoded.rows(), encoded.cols() + 1);
  points << encoded, fresh;
  const Matrix pcs = pca_project(points, 2);

  fs::create_directories(rc.output_dir);
  {
    std::ofstream out(rc.output_dir / "pca.csv");
    out << "name,pc1,pc2,new\n" << std::setprecision(10);
    for (Index k = 0; k < points.cols(); ++k) {
      const bool is_new = k == encoded.cols();
      out << (is_new ? std::string("<new>") : kg.entities().name(static_cast<EntityId>(k))) << ',' << pcs(0, k)
          << ',' << pcs(1, k) << ',' << (is_new ? 1 : 0) << '\n';
    }
  }
  std::ofstream sugg(rc.output_dir / "suggestions.tsv");
  sugg << "relation\trank\tentity\tscore\n";
  std::vector<RelationId> relations;
  for (const auto& [p, e] : nbrs) {
    if (std::find(relations.begin(), relations.end(), p) == relations.end()) relations.push_back(p);
  }
  for (RelationId p : relations) {
    const auto& rel = kg.relations().name(p);
    std::cout << "(<new>, " << rel << ", ?)\n";
    const auto ranked = neighbor_suggestions(model, encoded, fresh, p, top);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const auto& name = kg.entities().name(ranked[i].first);
      std::cout << "  " << std::setw(3) << i + 1 << "  " << std::left << std::setw(32) << name << std::right
                << std::setprecision(4) << ranked[i].second << '\n';
      sugg << rel << '\t' << i + 1 << '\t' << name << '\t' << std::setprecision(10) << ranked[i].second << '\n';
    }
  }
  write_config_file(rc.output_dir / "config.txt", rc);
  std::cout << "outputs in " << rc.output_dir.string() << " (seed " << rc.model.seed << ")\n";
  return 0;
}

int cmd_gen_dataset(const std::string& name, const fs::path& out, std::uint64_t seed, std::int32_t entities,
                    std::int32_t relations, std::size_t train, std::size_t valid, std::size_t test) {
  KnowledgeGraph kg;
  if (name == "federal-states") kg = gen_federal_states();
  else if (name == "synthetic-broodwar-like") kg = gen_small_kg(32, 5, 65, 11, 11, 7);
  else if (name == "small") kg = gen_small_kg(entities, relations, train, valid, test, seed);
  else throw ConfigError("unknown generator '" + name + "' (federal-states, synthetic-broodwar-like, small)");
  write_dataset(out, kg);
  print_stats(name, kg);
  std::cout << "written to " << out.string() << '\n';
  return 0;
}

int cmd_raster(const Common& c, const std::string& checkpoint, const std::vector<std::string>& names) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig rc = config_from_checkpoint(ckpt, c);
  if (!is_spiking(rc.model.kind)) throw ConfigError("raster needs a spiking model");
  const KnowledgeGraph kg = load_graph(rc);
  check_vocabulary(ckpt, kg);
  Model model(rc.model, kg);
  restore_params(model.params(), ckpt);
  const Matrix times = model.encode_all();
  std::vector<EntityId> ids;
  for (const auto& n : names) {
    const auto e = kg.entities().find(n);
    if (!e) throw VocabularyError("unknown entity '" + n + "'");
    ids.push_back(*e);
  }
  if (ids.empty()) {
    for (EntityId e = 0; e < kg.num_entities(); ++e) ids.push_back(e);
  }
  fs::create_directories(rc.output_dir);
  std::ofstream out(rc.output_dir / "raster.csv");
  out << "entity,neuron,t\n" << std::setprecision(10);
  for (EntityId e : ids) {
    for (Index i = 0; i < times.rows(); ++i) out << kg.entities().name(e) << ',' << i << ',' << times(i, e) << '\n';
  }
  std::cout << "spike times of " << ids.size() << " entities in " << (rc.output_dir / "raster.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // d x N temporaries sit just above the default mmap threshold; keep them on the heap
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Knowledge graph embeddings with frozen graph convolutions and spiking neurons"};
  app.require_subcommand(1);

  Common train_c, eval_c, bench_c, ind_c, raster_c;

  auto* train = app.add_subcommand("train", "fit a model and keep the best validation checkpoint");
  add_data_options(train, train_c);
  add_model_options(train, train_c);
  add_train_options(train, train_c);

  std::string eval_ckpt;
  std::vector<std::string> eval_splits{"test"};
  auto* eval = app.add_subcommand("eval", "filtered ranking metrics of a checkpoint");
  add_data_options(eval, eval_c);
  eval->add_option("--checkpoint,-c", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--splits", eval_splits, "train, valid (or eval), test")->delimiter(',');

  std::vector<Index> dims{16, 32, 64, 128};
  int reps = 100, warmup = 3;
  auto* bench = app.add_subcommand("bench", "frozen vs trained backward pass and optimizer step");
  add_data_options(bench, bench_c);
  add_model_options(bench, bench_c);
  add_train_options(bench, bench_c);
  bench->add_option("--dims", dims, "embedding sizes")->delimiter(',');
  bench->add_option("--reps", reps, "timed repetitions per configuration")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", warmup, "untimed repetitions")->check(CLI::NonNegativeNumber);

  std::string ind_ckpt, ind_neighbors;
  std::size_t top = 10;
  auto* inductive = app.add_subcommand("inductive", "embed an unseen node from its neighbours");
  add_data_options(inductive, ind_c);
  inductive->add_option("--checkpoint,-c", ind_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  inductive->add_option("--neighbors,-n", ind_neighbors, "entity:relation,...")->required();
  inductive->add_option("--top", top, "suggestions per relation");

  std::string gen_name;
  fs::path gen_out;
  std::uint64_t gen_seed = 42;
  std::int32_t gen_entities = 32, gen_relations = 5;
  std::size_t gen_train = 65, gen_valid = 11, gen_test = 11;
  auto* gen = app.add_subcommand("gen-dataset", "write a generated dataset");
  gen->add_option("name", gen_name, "federal-states, synthetic-broodwar-like or small")->required();
  gen->add_option("out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "seed for 'small'");
  gen->add_option("--entities", gen_entities, "entities for 'small'");
  gen->add_option("--relations", gen_relations, "relations for 'small'");
  gen->add_option("--train", gen_train, "training triples for 'small'");
  gen->add_option("--valid", gen_valid, "validation triples for 'small'");
  gen->add_option("--test", gen_test, "test triples for 'small'");

  std::string raster_ckpt;
  std::vector<std::string> raster_entities;
  auto* raster = app.add_subcommand("raster", "dump output spike times of a spiking checkpoint");
  add_data_options(raster, raster_c);
  raster->add_option("--checkpoint,-c", raster_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  raster->add_option("--entities", raster_entities, "entity names (default all)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_c);
    if (*eval) return cmd_eval(eval_c, eval_ckpt, eval_splits);
    if (*bench) return cmd_bench(bench_c, dims, reps, warmup);
    if (*inductive) return cmd_inductive(ind_c, ind_ckpt, ind_neighbors, top);
    if (*gen) return cmd_gen_dataset(gen_name, gen_out, gen_seed, gen_entities, gen_relations, gen_train, gen_valid,
                                     gen_test);
    if (*raster) return cmd_raster(raster_c, raster_ckpt, raster_entities);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
