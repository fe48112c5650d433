#include "molprop/graph.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <string>
#include <vector>

namespace molprop {

namespace {

std::string at_index(const char* what, int i) {
  return std::string(what) + " at index " + std::to_string(i);
}

}  // namespace

const MolecularGraph& validate_graph(const MolecularGraph& g, const DatasetSchema& schema) {
  const int n = g.n_atoms();
  const int m = g.n_bonds();

  if (g.atom_features.cols() != static_cast<Eigen::Index>(schema.atom_vocab.size())) {
    throw ValidationError("shape_mismatch",
                          "atom_features has " + std::to_string(g.atom_features.cols()) +
                              " columns, schema declares " +
                              std::to_string(schema.atom_vocab.size()));
  }
  if (g.bond_features.rows() != m ||
      (m > 0 && g.bond_features.cols() != static_cast<Eigen::Index>(schema.bond_vocab.size()))) {
    throw ValidationError("shape_mismatch",
                          "bond_features shape " + std::to_string(g.bond_features.rows()) + "x" +
                              std::to_string(g.bond_features.cols()) + " does not match " +
                              std::to_string(m) + " bonds with " +
                              std::to_string(schema.bond_vocab.size()) + " fields");
  }
  if (g.coords.rows() != n) {
    throw ValidationError("shape_mismatch", "coords rows " + std::to_string(g.coords.rows()) +
                                                " != n_atoms " + std::to_string(n));
  }

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(g.coords(i, k))) {
        throw ValidationError("nonfinite_coord", at_index("non-finite coordinate", i));
      }
    }
    for (int f = 0; f < static_cast<int>(schema.atom_vocab.size()); ++f) {
      const auto v = g.atom_features(i, f);
      if (v < 0 || v >= schema.atom_vocab[f]) {
        throw ValidationError("feature_out_of_vocab",
                              "atom feature column " + std::to_string(f) + " value " +
                                  std::to_string(v) + at_index(" out of vocabulary", i));
      }
    }
  }

  std::set<std::pair<int, int>> seen;
  for (int b = 0; b < m; ++b) {
    const auto [u, v] = g.bonds[b];
    if (u < 0 || u >= n || v < 0 || v >= n) {
      throw ValidationError("bond_endpoint_out_of_range",
                            at_index("bond endpoint out of range", b));
    }
    if (u == v) {
      throw ValidationError("self_loop", at_index("self loop", b));
    }
    const auto key = std::minmax(u, v);
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate_bond", at_index("duplicate undirected bond", b));
    }
    for (int f = 0; f < static_cast<int>(schema.bond_vocab.size()); ++f) {
      const auto x = g.bond_features(b, f);
      if (x < 0 || x >= schema.bond_vocab[f]) {
        throw ValidationError("feature_out_of_vocab",
                              "bond feature column " + std::to_string(f) + " value " +
                                  std::to_string(x) + at_index(" out of vocabulary", b));
      }
    }
  }
  return g;
}

DistanceMatrix pairwise_euclidean(const Coords& coords) {
  const Eigen::Index n = coords.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(coords(i, k))) {
        throw ValidationError("nonfinite_coord",
                              at_index("non-finite coordinate", static_cast<int>(i)));
      }
    }
  }
  DistanceMatrix out;
  out.d = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Real dist = (coords.row(i) - coords.row(j)).norm();
      out.d(i, j) = dist;
      out.d(j, i) = dist;  // assign both triangles so symmetry is exact
    }
  }
  return out;
}

HopMatrix shortest_path_lengths(const MolecularGraph& g) {
  const int n = g.n_atoms();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [u, v] : g.bonds) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }

  HopMatrix out;
  out.h = IMat::Constant(n, n, kUnreachable);
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    out.h(s, s) = 0;
    queue.clear();
    queue.push_back(s);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (out.h(s, v) == kUnreachable) {
          out.h(s, v) = out.h(s, u) + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return out;
}

}  // namespace molprop
