#include "kge/linalg.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace kge {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
  return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto n = get<std::uint32_t>(in, path);
  if (n > (1u << 24)) throw std::runtime_error("corrupt string length in " + path.string());
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::map<std::string, std::string>& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, metadata.size());
  for (const auto& [k, v] : metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint64_t>(out, store.size());
  std::ofstream manifest(path.string() + ".manifest");
  for (const auto& p : store) {
    put_string(out, p.name);
    put<std::uint8_t>(out, p.frozen ? 1 : 0);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * static_cast<Index>(sizeof(double))));
    manifest << p.name << '\t' << p.value.rows() << '\t' << p.value.cols() << '\t' << (p.frozen ? "frozen" : "trainable")
             << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  if (const auto version = get<std::uint32_t>(in, path); version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_meta = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    auto k = get_string(in, path);
    ckpt.metadata[k] = get_string(in, path);
  }
  const auto n_tensors = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    CheckpointTensor t;
    t.name = get_string(in, path);
    t.frozen = get<std::uint8_t>(in, path) != 0;
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows * cols > (1ull << 32)) throw std::runtime_error("corrupt tensor shape in " + path.string());
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * static_cast<Index>(sizeof(double))));
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void restore_params(ParamStore& store, const Checkpoint& ckpt) {
  for (auto& p : store) {
    const CheckpointTensor* found = nullptr;
    for (const auto& t : ckpt.tensors) {
      if (t.name == p.name) found = &t;
    }
    if (!found) throw VocabularyError("checkpoint lacks tensor " + p.name);
    require_shape(found->value, p.value.rows(), p.value.cols(), p.name.c_str());
    p.value = found->value;
  }
}

}  // namespace kge
