#include "molprop/cache.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

// Format v1. All integers and reals are little-endian 64-bit; matrices are
// row-major with dimension prefixes. This code assumes a little-endian host.

namespace molprop {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'M', 'P', 'F', 'E', 'A', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError(0, "feature cache truncated");
  return v;
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw DataError(0, "feature cache truncated");
}

template <class M>
void put_matrix(std::ostream& out, const M& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  put_bytes(out, m.data(), sizeof(typename M::Scalar) * static_cast<std::size_t>(m.size()));
}

template <class M>
M get_matrix(std::istream& in) {
  const auto rows = static_cast<Eigen::Index>(get_u64(in));
  const auto cols = static_cast<Eigen::Index>(get_u64(in));
  M m(rows, cols);
  get_bytes(in, m.data(), sizeof(typename M::Scalar) * static_cast<std::size_t>(m.size()));
  return m;
}

json meta_to_json(const FeatureCacheMeta& meta) {
  json j;
  j["atom_vocab_sizes"] = meta.schema.atom_vocab;
  j["bond_vocab_sizes"] = meta.schema.bond_vocab;
  j["rbf"] = {{"n_kernels", meta.rbf.n_kernels},
              {"center_min", meta.rbf.center_min},
              {"center_max", meta.rbf.center_max},
              {"gamma", meta.rbf.gamma}};
  j["spatial_mode"] = to_string(meta.mode);
  return j;
}

FeatureCacheMeta meta_from_json(const json& j) {
  FeatureCacheMeta meta;
  meta.schema.atom_vocab = j.at("atom_vocab_sizes").get<std::vector<int>>();
  meta.schema.bond_vocab = j.at("bond_vocab_sizes").get<std::vector<int>>();
  meta.rbf.n_kernels = j.at("rbf").at("n_kernels").get<int>();
  meta.rbf.center_min = j.at("rbf").at("center_min").get<Real>();
  meta.rbf.center_max = j.at("rbf").at("center_max").get<Real>();
  meta.rbf.gamma = j.at("rbf").at("gamma").get<Real>();
  meta.mode = spatial_mode_from_string(j.at("spatial_mode").get<std::string>());
  return meta;
}

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const FeatureCacheMeta& meta,
                         const std::vector<FeaturizedGraph>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(0, "cannot open for writing: " + path.string());
  put_bytes(out, kMagic, sizeof(kMagic));
  const std::string meta_str = meta_to_json(meta).dump();
  put_u64(out, meta_str.size());
  put_bytes(out, meta_str.data(), meta_str.size());
  put_u64(out, records.size());

  for (const auto& fg : records) {
    put_u64(out, fg.id.size());
    put_bytes(out, fg.id.data(), fg.id.size());
    put_u64(out, static_cast<std::uint64_t>(fg.n_atoms));
    put_matrix(out, fg.node_feat);
    put_matrix(out, fg.arc_src);
    put_matrix(out, fg.arc_dst);
    put_matrix(out, fg.arc_feat);
    put_matrix(out, fg.bond_dist);
    put_matrix(out, fg.pair_rbf);
    put_matrix(out, fg.hop.h);
    put_matrix(out, fg.in_degree);
    const std::uint64_t has_target = fg.target ? 1 : 0;
    put_u64(out, has_target);
    const Real t = fg.target.value_or(0.0);
    put_bytes(out, &t, sizeof(t));
  }
  if (!out) throw DataError(0, "write failed: " + path.string());
}

std::pair<FeatureCacheMeta, std::vector<FeaturizedGraph>> read_feature_cache(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(0, "cannot open feature cache: " + path.string());
  char magic[8];
  get_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(0, "not a feature cache (bad magic): " + path.string());
  }
  const auto meta_len = get_u64(in);
  std::string meta_str(meta_len, '\0');
  get_bytes(in, meta_str.data(), meta_len);
  FeatureCacheMeta meta;
  try {
    meta = meta_from_json(json::parse(meta_str));
  } catch (const json::exception& e) {
    throw DataError(0, std::string("bad feature cache meta: ") + e.what());
  }

  const auto n = get_u64(in);
  std::vector<FeaturizedGraph> records;
  records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    FeaturizedGraph fg;
    const auto id_len = get_u64(in);
    fg.id.resize(id_len);
    get_bytes(in, fg.id.data(), id_len);
    fg.n_atoms = static_cast<int>(get_u64(in));
    fg.node_feat = get_matrix<IMat>(in);
    fg.arc_src = get_matrix<IVec>(in);
    fg.arc_dst = get_matrix<IVec>(in);
    fg.arc_feat = get_matrix<IMat>(in);
    fg.bond_dist = get_matrix<Vec>(in);
    fg.pair_rbf = get_matrix<Mat>(in);
    fg.hop.h = get_matrix<IMat>(in);
    fg.in_degree = get_matrix<IVec>(in);
    const auto has_target = get_u64(in);
    Real t = 0;
    get_bytes(in, &t, sizeof(t));
    if (has_target) fg.target = t;
    records.push_back(std::move(fg));
  }
  return {meta, std::move(records)};
}

}  // namespace molprop
