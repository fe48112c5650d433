#pragma once

#include "molprop/graph.hpp"
#include "molprop/rng.hpp"
#include "molprop/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace molprop {

/// Gaussian RBF expansion of a scalar distance over evenly spaced centers.
struct RbfConfig {
  int n_kernels = 256;
  Real center_min = 0.0;  // Angstrom
  Real center_max = 10.0;
  Real gamma = 0.0;       // 1/Angstrom^2

  void validate() const;
};

/// Kernel count from the model configuration; centers cover [0, 10] Angstrom
/// and gamma = 1/(2*spacing^2) unless overridden.
RbfConfig make_rbf_config(int n_kernels = 256, Real center_min = 0.0, Real center_max = 10.0);

/// Additive noise on bond distances modelling force-field vs DFT geometry
/// error. Defaults are the fitted location/scale constants.
struct LaplaceParams {
  Real mu = 0.001994;
  Real b = 0.031939;
};

enum class SpatialMode { kEuclideanRbf, kHop };

const char* to_string(SpatialMode mode);
SpatialMode spatial_mode_from_string(const std::string& s);

/// Model-ready dense arrays for one molecule. Arcs are the two directed
/// copies of each undirected bond, listed (u,v) then (v,u).
struct FeaturizedGraph {
  std::string id;
  int n_atoms = 0;
  IMat node_feat;    // n x F_node categorical indices
  IVec arc_src;      // per directed arc
  IVec arc_dst;
  IMat arc_feat;     // n_arcs x F_bond
  Vec bond_dist;     // per arc, Angstrom, unaugmented
  Mat pair_rbf;      // (n*n) x K, row p = i*n + j; empty in hop mode
  HopMatrix hop;     // n x n
  IVec in_degree;    // n
  std::optional<Real> target;

  int n_arcs() const { return static_cast<int>(arc_src.size()); }
};

/// Component k = exp(-gamma * (d - mu_k)^2) for K evenly spaced centers.
Vec rbf_expand(Real d, const RbfConfig& cfg);

/// Row-per-distance batch form of rbf_expand.
Mat rbf_expand(const Vec& d, const RbfConfig& cfg);

/// One Laplace(mu, b) draw via inverse-CDF sampling.
Real laplace_sample(const LaplaceParams& p, Rng& rng);

/// Adds an independent Laplace draw to each entry; results are clamped below
/// at 1e-3 Angstrom so downstream RBF inputs stay valid.
Vec laplace_augment(const Vec& bond_dists, const LaplaceParams& p, Rng& rng);

inline constexpr Real kMinBondDist = 1e-3;

/// Validates the graph and assembles every FeaturizedGraph field. In
/// euclidean-rbf mode pair_rbf is filled from the pairwise distances; in hop
/// mode it is left empty.
FeaturizedGraph featurize_molecule(const MolecularGraph& g, const DatasetSchema& schema,
                                   const RbfConfig& cfg, SpatialMode mode);

/// Parallel map of featurize_molecule over a list of molecules. Output order
/// matches input order regardless of worker count.
std::vector<FeaturizedGraph> featurize_all(const std::vector<MolecularGraph>& graphs,
                                           const DatasetSchema& schema, const RbfConfig& cfg,
                                           SpatialMode mode, int workers = 1);

}  // namespace molprop
