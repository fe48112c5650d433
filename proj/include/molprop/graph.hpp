#pragma once

#include "molprop/errors.hpp"
#include "molprop/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace molprop {

// Vocabulary sizes per categorical column, declared by the dataset header.
struct DatasetSchema {
  std::vector<int> atom_vocab;
  std::vector<int> bond_vocab;

  bool operator==(const DatasetSchema&) const = default;
};

/// A raw molecular graph as ingested from the dataset: categorical feature
/// indices, an undirected bond list, 3D coordinates in Angstrom and an
/// optional scalar regression target (HOMO-LUMO gap, eV).
struct MolecularGraph {
  std::string id;
  IMat atom_features;                       // n_atoms x n_atom_fields
  std::vector<std::pair<int, int>> bonds;   // undirected (u, v)
  IMat bond_features;                       // n_bonds x n_bond_fields
  Coords coords;                            // n_atoms x 3
  std::optional<Real> target;

  int n_atoms() const { return static_cast<int>(atom_features.rows()); }
  int n_bonds() const { return static_cast<int>(bonds.size()); }
};

struct DistanceMatrix {
  Mat d;  // n x n, symmetric, zero diagonal
};

// Unweighted shortest-path lengths; kUnreachable marks disconnected pairs.
inline constexpr std::int64_t kUnreachable = -1;

struct HopMatrix {
  IMat h;  // n x n
};

/// Checks every MolecularGraph invariant against the schema and returns the
/// graph unchanged. Throws ValidationError with a distinct tag per failure:
/// bond_endpoint_out_of_range, self_loop, duplicate_bond, nonfinite_coord,
/// feature_out_of_vocab, shape_mismatch.
const MolecularGraph& validate_graph(const MolecularGraph& g, const DatasetSchema& schema);

/// d[i][j] = Euclidean distance between atoms i and j.
DistanceMatrix pairwise_euclidean(const Coords& coords);

/// All-pairs unweighted shortest-path lengths via BFS from every source.
HopMatrix shortest_path_lengths(const MolecularGraph& g);

}  // namespace molprop
