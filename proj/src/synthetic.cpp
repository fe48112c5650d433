#include "molprop/synthetic.hpp"

#include "molprop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>

namespace molprop {

Real synthetic_target(const MolecularGraph& g) {
  const Eigen::Index n = g.atom_features.rows();
  Real s0 = 0, s1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s0 += static_cast<Real>(g.atom_features(i, 0));
    if (g.atom_features.cols() > 1) s1 += static_cast<Real>(g.atom_features(i, 1));
  }
  s0 /= static_cast<Real>(n) * 15.0;  // vocab 16 -> [0, 1]
  s1 /= static_cast<Real>(n) * 7.0;
  const Real density = static_cast<Real>(g.bonds.size()) / static_cast<Real>(n);
  return s0 + 0.5 * std::sin(3.0 * s1 + density) + 0.25 * density;
}

namespace {

// Everything the models' inputs can see, minus coordinates. Used to reject
// duplicate molecules so memorization targets stay well-defined.
std::string topology_signature(const MolecularGraph& g) {
  std::string s;
  for (Eigen::Index i = 0; i < g.atom_features.rows(); ++i) {
    for (Eigen::Index f = 0; f < g.atom_features.cols(); ++f) {
      s += std::to_string(g.atom_features(i, f)) + ",";
    }
    s += ";";
  }
  s += "|";
  for (std::size_t b = 0; b < g.bonds.size(); ++b) {
    s += std::to_string(g.bonds[b].first) + "-" + std::to_string(g.bonds[b].second) + ":";
    for (Eigen::Index f = 0; f < g.bond_features.cols(); ++f) {
      s += std::to_string(g.bond_features(static_cast<Eigen::Index>(b), f)) + ",";
    }
    s += ";";
  }
  return s;
}

MolecularGraph random_molecule(const SyntheticConfig& cfg, Rng& rng, int index) {
  MolecularGraph g;
  g.id = "syn-" + std::to_string(index);
  const int n = cfg.min_atoms +
                static_cast<int>(rng.uniform_int(0, cfg.max_atoms - cfg.min_atoms));
  g.atom_features.resize(n, static_cast<Eigen::Index>(cfg.atom_vocab.size()));
  for (int i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < cfg.atom_vocab.size(); ++f) {
      g.atom_features(i, static_cast<Eigen::Index>(f)) =
          static_cast<std::int64_t>(rng.uniform_int(0, cfg.atom_vocab[f] - 1));
    }
  }

  std::set<std::pair<int, int>> used;
  for (int i = 1; i < n; ++i) {  // random spanning tree
    const int parent = static_cast<int>(rng.uniform_int(0, i - 1));
    g.bonds.emplace_back(parent, i);
    used.insert({std::min(parent, i), std::max(parent, i)});
  }
  const int extra_tries = n / 3;
  for (int k = 0; k < extra_tries && n >= 2; ++k) {
    const int u = static_cast<int>(rng.uniform_int(0, n - 1));
    const int v = static_cast<int>(rng.uniform_int(0, n - 1));
    if (u == v) continue;
    const auto key = std::make_pair(std::min(u, v), std::max(u, v));
    if (used.count(key)) continue;
    used.insert(key);
    g.bonds.emplace_back(u, v);
  }

  g.bond_features.resize(static_cast<Eigen::Index>(g.bonds.size()),
                         static_cast<Eigen::Index>(cfg.bond_vocab.size()));
  for (Eigen::Index b = 0; b < g.bond_features.rows(); ++b) {
    for (std::size_t f = 0; f < cfg.bond_vocab.size(); ++f) {
      g.bond_features(b, static_cast<Eigen::Index>(f)) =
          static_cast<std::int64_t>(rng.uniform_int(0, cfg.bond_vocab[f] - 1));
    }
  }

  g.coords.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) g.coords(i, c) = rng.uniform(0.0, cfg.box);
  }
  g.target = synthetic_target(g);
  return g;
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  // n_molecules == 0 is allowed: an empty corpus is still a valid dataset
  if (cfg.n_molecules < 0 || cfg.min_atoms < 1 || cfg.max_atoms < cfg.min_atoms) {
    throw ConfigError("synthetic: bad size parameters");
  }
  if (cfg.atom_vocab.empty() || cfg.bond_vocab.empty()) {
    throw ConfigError("synthetic: empty vocabularies");
  }
  Dataset ds;
  ds.schema.atom_vocab = cfg.atom_vocab;
  ds.schema.bond_vocab = cfg.bond_vocab;
  Rng rng(cfg.seed);
  std::unordered_set<std::string> seen;
  for (int i = 0; i < cfg.n_molecules; ++i) {
    MolecularGraph g = random_molecule(cfg, rng, i);
    while (!seen.insert(topology_signature(g)).second) {
      g = random_molecule(cfg, rng, i);
    }
    validate_graph(g, ds.schema);
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

}  // namespace molprop
