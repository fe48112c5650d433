#pragma once

#include "molprop/dataset.hpp"

#include <cstdint>

namespace molprop {

/// Small random-molecule corpus for overfit and end-to-end tests: random
/// trees with a few extra edges, random categorical features, coordinates in
/// a box, and a smooth target computed from features and topology only (so
/// both models can learn it; coordinates carry no target information).
struct SyntheticConfig {
  int n_molecules = 64;
  int min_atoms = 4;
  int max_atoms = 12;
  std::vector<int> atom_vocab = {16, 8, 8};
  std::vector<int> bond_vocab = {8, 4};
  Real box = 6.0;  // coordinate range, Angstrom
  std::uint64_t seed = 1234;
};

/// Deterministic target in roughly [-0.3, 1.9]; depends only on categorical
/// features and bond count, never on coordinates.
Real synthetic_target(const MolecularGraph& g);

Dataset make_synthetic_dataset(const SyntheticConfig& cfg = {});

}  // namespace molprop
