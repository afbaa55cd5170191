#include "kge/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kge {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

long long as_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto i = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("bad unsigned integer for " + key + ": '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues to_kv(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  const auto& s = m.spike;
  return {
      {"dataset", c.dataset},
      {"data_dir", c.data_dir.string()},
      {"output_dir", c.output_dir.string()},
      {"add_inverse_relations", fmt(c.add_inverse_relations)},
      {"model", to_string(m.kind)},
      {"dim", std::to_string(m.dim)},
      {"frozen", fmt(m.frozen)},
      {"self_loop", fmt(m.self_loop)},
      {"layers", std::to_string(m.layers)},
      {"activation", m.activation == Activation::ReLU ? "relu" : "identity"},
      {"dropout", fmt(m.dropout)},
      {"l2_weight", fmt(m.l2_weight)},
      {"l2_mode", to_string(m.l2_mode)},
      {"inputs", std::to_string(s.inputs)},
      {"tau", fmt(s.nlif.tau)},
      {"u_th", fmt(s.nlif.u_th)},
      {"t_lo", fmt(s.t_lo)},
      {"t_hi", fmt(s.t_hi)},
      {"spike_init_mean", fmt(s.init_mean)},
      {"spike_init_std", fmt(s.init_std)},
      {"srgcn_weight_mean", fmt(s.frozen_mean)},
      {"srgcn_weight_std", fmt(s.frozen_std)},
      {"spike_delta", fmt(s.delta)},
      {"seed", std::to_string(m.seed)},
      {"lr", fmt(t.lr)},
      {"margin", fmt(t.margin)},
      {"negatives", std::to_string(t.negatives)},
      {"batch_size", std::to_string(t.batch_size)},
      {"max_epochs", std::to_string(t.max_epochs)},
      {"eval_every", std::to_string(t.eval_every)},
      {"subsample", fmt(t.subsample)},
      {"threads", std::to_string(t.threads)},
  };
}

RunConfig from_kv(const KeyValues& kv, RunConfig c) {
  auto& m = c.model;
  auto& t = c.train;
  auto& s = m.spike;
  for (const auto& [k, v] : kv) {
    if (k == "dataset") c.dataset = v;
    else if (k == "data_dir") c.data_dir = v;
    else if (k == "output_dir") c.output_dir = v;
    else if (k == "add_inverse_relations") c.add_inverse_relations = as_bool(k, v);
    else if (k == "model") m.kind = parse_model_kind(v);
    else if (k == "dim") m.dim = static_cast<Index>(as_int(k, v));
    else if (k == "frozen") m.frozen = as_bool(k, v);
    else if (k == "self_loop") m.self_loop = as_bool(k, v);
    else if (k == "layers") m.layers = static_cast<int>(as_int(k, v));
    else if (k == "activation") {
      if (v == "relu") m.activation = Activation::ReLU;
      else if (v == "identity") m.activation = Activation::Identity;
      else throw ConfigError("bad activation '" + v + "'");
    }
    else if (k == "dropout") m.dropout = as_double(k, v);
    else if (k == "l2_weight") m.l2_weight = as_double(k, v);
    else if (k == "l2_mode") m.l2_mode = parse_l2_mode(v);
    else if (k == "inputs") s.inputs = static_cast<int>(as_int(k, v));
    else if (k == "tau") s.nlif.tau = as_double(k, v);
    else if (k == "u_th") s.nlif.u_th = as_double(k, v);
    else if (k == "t_lo") s.t_lo = as_double(k, v);
    else if (k == "t_hi") s.t_hi = as_double(k, v);
    else if (k == "spike_init_mean") s.init_mean = as_double(k, v);
    else if (k == "spike_init_std") s.init_std = as_double(k, v);
    else if (k == "srgcn_weight_mean") s.frozen_mean = as_double(k, v);
    else if (k == "srgcn_weight_std") s.frozen_std = as_double(k, v);
    else if (k == "spike_delta") s.delta = as_double(k, v);
    else if (k == "seed") m.seed = t.seed = as_u64(k, v);
    else if (k == "lr") t.lr = as_double(k, v);
    else if (k == "margin") t.margin = as_double(k, v);
    else if (k == "negatives") t.negatives = static_cast<int>(as_int(k, v));
    else if (k == "batch_size") t.batch_size = static_cast<int>(as_int(k, v));
    else if (k == "max_epochs") t.max_epochs = static_cast<int>(as_int(k, v));
    else if (k == "eval_every") t.eval_every = static_cast<int>(as_int(k, v));
    else if (k == "subsample") t.subsample = as_double(k, v);
    else if (k == "threads") t.threads = static_cast<int>(as_int(k, v));
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (m.dim < 1) throw ConfigError("dim must be positive");
  if (t.margin < 0) throw ConfigError("margin must be non-negative");
  if (t.negatives < 1) throw ConfigError("negatives must be at least 1");
  if (t.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (t.max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (t.eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (t.subsample <= 0 || t.subsample > 1) throw ConfigError("subsample must lie in (0, 1]");
  if (m.dropout < 0 || m.dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  if (s.inputs < 1) throw ConfigError("inputs must be at least 1");
  if (s.nlif.tau <= 0 || s.nlif.u_th <= 0) throw ConfigError("tau and u_th must be positive");
  return c;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_config_file(const std::filesystem::path& path, const RunConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# resolved run configuration\n";
  for (const auto& [k, v] : to_kv(config)) out << k << " = " << v << '\n';
}

KeyValues recommended_settings(const std::string& dataset, ModelKind kind, bool frozen, bool self_loop) {
  KeyValues kv;
  const bool countries = dataset == "countries_s1";
  const bool umls = dataset == "umls";
  const bool fb = dataset == "fb15k-237";
  const bool federal = dataset == "federal-states";
  const bool broodwar = dataset == "synthetic-broodwar-like";
  auto pick = [&](const char* c, const char* u, const char* f) {
    return countries ? c : umls ? u : f;
  };
  auto big = countries || umls || fb;

  switch (kind) {
    case ModelKind::TransE:
      if (big) kv["dim"] = pick("32", "64", "128");
      if (federal) kv["dim"] = "16";
      if (broodwar) kv["dim"] = "32";
      kv["l2_mode"] = "sum";
      break;
    case ModelKind::DistMult:
      if (big) {
        kv["dim"] = pick("6", "32", "32");
        kv["lr"] = pick("0.05", "0.001", "0.001");
      }
      kv["l2_mode"] = "sum";
      break;
    case ModelKind::RgcnTransE:
      if (big) {
        if (frozen && self_loop) kv["dim"] = pick("64", "128", "128");
        else if (frozen) kv["dim"] = pick("128", "128", "64");
        else if (self_loop) kv["dim"] = pick("64", "128", "128");
        else kv["dim"] = "128";
      }
      if (federal || broodwar) kv["dim"] = "16";
      kv["margin"] = "8";
      break;
    case ModelKind::RgcnDistMult:
      if (big) {
        kv["dim"] = pick("56", "32", "128");
        kv["lr"] = pick("0.001", "0.01", "0.001");
      }
      break;
    case ModelKind::SpikE:
      kv["dim"] = "32";
      kv["inputs"] = countries ? "40" : "20";
      kv["lr"] = "0.01";
      kv["margin"] = "8";
      break;
    case ModelKind::Hybrid:
      kv["dim"] = "64";
      kv["inputs"] = "40";
      kv["lr"] = "0.001";
      break;
    case ModelKind::SRGCN:
      kv["dim"] = broodwar ? "16" : "32";
      kv["inputs"] = "16";
      break;
  }
  if (!uses_rgcn(kind)) kv["dropout"] = "0";
  if (federal || broodwar) kv["dropout"] = "0";
  if (federal) kv["negatives"] = "5";
  // about as many optimizer steps as UMLS gets in 1000 epochs
  if (countries) kv["max_epochs"] = "4000";
  if (federal || broodwar) {
    kv["max_epochs"] = "40000";
    kv["eval_every"] = "100";
  }
  if (fb) {
    kv["batch_size"] = "20000";
    kv["subsample"] = "0.5";
    kv["max_epochs"] = "200";
  }
  return kv;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("KGE_DATA_DIR"); env && *env) return env;
#ifdef KGE_DEFAULT_DATA_DIR
  return KGE_DEFAULT_DATA_DIR;
#else
  return "data";
#endif
}

KnowledgeGraph resolve_dataset(const std::string& name, const std::filesystem::path& data_dir,
                               KnowledgeGraphOptions options) {
  const auto root = data_dir.empty() ? default_data_dir() : data_dir;
  std::filesystem::path dir;
  if (name == "countries_s1") dir = root / "countries_s1";
  else if (name == "umls") dir = root / "umls";
  else if (name == "fb15k-237") dir = root / "fb15k-237";
  else if (name == "federal-states") dir = root / "federal_states";
  else if (name == "synthetic-broodwar-like") dir = root / "synthetic_broodwar";
  else dir = name;

  if (!std::filesystem::is_directory(dir)) {
    if (name == "federal-states" || name == "synthetic-broodwar-like") {
      const KnowledgeGraph g = name == "federal-states" ? gen_federal_states() : gen_small_kg(32, 5, 65, 11, 11, 7);
      return KnowledgeGraph(g.entities(), g.relations(), g.train(), g.valid(), g.test(), options);
    }
    if (name == "fb15k-237") {
      throw ConfigError("FB15k-237 not found; place train.txt, valid.txt and test.txt under " + dir.string());
    }
    throw ConfigError("dataset not found: " + name + " (looked in " + dir.string() + ")");
  }
  return load_dataset(dir, options);
}

}  // namespace kge
