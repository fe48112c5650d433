#include "molprop/params.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace molprop {

Mat& ParameterStore::add(const std::string& name, Mat init) {
  if (index_.count(name)) throw ConfigError("parameter already registered: " + name);
  index_.emplace(name, order_.size());
  order_.push_back(name);
  tensors_.push_back(std::move(init));
  return tensors_.back();
}

Mat& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return tensors_[it->second];
}

const Mat& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return tensors_[it->second];
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::int64_t ParameterStore::total_scalars() const {
  std::int64_t n = 0;
  for (const Mat& m : tensors_) n += m.size();
  return n;
}

BoundParams bind(ad::Tape& tape, const ParameterStore& store) {
  BoundParams b;
  b.store = &store;
  b.v.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) b.v.push_back(tape.leaf(store.tensor(i)));
  return b;
}

BoundParams bind_values(const ParameterStore& store, std::vector<ad::Value> tensors) {
  if (tensors.size() != store.count()) {
    throw ConfigError("bind_values: expected " + std::to_string(store.count()) +
                      " tensors, got " + std::to_string(tensors.size()));
  }
  BoundParams b;
  b.store = &store;
  b.v = std::move(tensors);
  return b;
}

Mat init_uniform_fanin(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const Real bound = Real(1) / std::sqrt(static_cast<Real>(rows));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

Mat init_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, Real stddev) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  }
  return m;
}

namespace {

constexpr char kMagic[8] = {'M', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError(0, "checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const ParameterStore& store) {
  if (!nlohmann::json::accept(meta_json)) {
    throw ConfigError("checkpoint meta is not valid JSON");
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(0, "cannot open for writing: " + tmp);
    out.write(kMagic, sizeof kMagic);
    put_u64(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    put_u64(out, store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
      const std::string& name = store.names()[i];
      const Mat& m = store.tensor(i);
      put_u64(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u64(out, static_cast<std::uint64_t>(m.rows()));
      put_u64(out, static_cast<std::uint64_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(m.size())));
    }
    if (!out) throw DataError(0, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);

  std::ofstream manifest(path + ".txt", std::ios::trunc);
  if (manifest) {
    for (std::size_t i = 0; i < store.count(); ++i) {
      const Mat& m = store.tensor(i);
      manifest << store.names()[i] << ' ' << m.rows() << 'x' << m.cols() << '\n';
    }
    manifest << "# total scalars: " << store.total_scalars() << '\n';
  }
}

std::pair<std::string, ParameterStore> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(0, "cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError(0, "not a checkpoint (bad magic): " + path);
  }
  const std::uint64_t meta_len = get_u64(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw DataError(0, "checkpoint truncated");

  ParameterStore store;
  const std::uint64_t n_params = get_u64(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::uint64_t name_len = get_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(Real) * rows * cols));
    if (!in) throw DataError(0, "checkpoint truncated in tensor " + name);
    store.add(name, std::move(m));
  }
  return {std::move(meta), std::move(store)};
}

}  // namespace molprop
