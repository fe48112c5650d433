#include "molprop/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

namespace molprop {

void RbfConfig::validate() const {
  if (n_kernels < 1) throw ConfigError("rbf n_kernels must be >= 1");
  if (!(center_min < center_max)) throw ConfigError("rbf center_min must be < center_max");
  if (!(gamma > 0)) throw ConfigError("rbf gamma must be > 0");
}

RbfConfig make_rbf_config(int n_kernels, Real center_min, Real center_max) {
  RbfConfig cfg;
  cfg.n_kernels = n_kernels;
  cfg.center_min = center_min;
  cfg.center_max = center_max;
  const Real spacing =
      n_kernels > 1 ? (center_max - center_min) / static_cast<Real>(n_kernels - 1)
                    : (center_max - center_min);
  cfg.gamma = 1.0 / (2.0 * spacing * spacing);
  cfg.validate();
  return cfg;
}

const char* to_string(SpatialMode mode) {
  return mode == SpatialMode::kEuclideanRbf ? "euclidean-rbf" : "hop";
}

SpatialMode spatial_mode_from_string(const std::string& s) {
  if (s == "euclidean-rbf") return SpatialMode::kEuclideanRbf;
  if (s == "hop") return SpatialMode::kHop;
  throw ConfigError("unknown spatial mode: " + s);
}

Vec rbf_expand(Real d, const RbfConfig& cfg) {
  if (!std::isfinite(d) || d < 0) {
    throw NumericalError("rbf_expand: distance must be finite and nonnegative");
  }
  cfg.validate();
  Vec out(cfg.n_kernels);
  const Real spacing = cfg.n_kernels > 1
                           ? (cfg.center_max - cfg.center_min) / (cfg.n_kernels - 1)
                           : 0.0;
  for (int k = 0; k < cfg.n_kernels; ++k) {
    const Real mu_k = cfg.center_min + spacing * k;
    const Real delta = d - mu_k;
    out(k) = std::exp(-cfg.gamma * delta * delta);
  }
  return out;
}

Mat rbf_expand(const Vec& d, const RbfConfig& cfg) {
  Mat out(d.size(), cfg.n_kernels);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out.row(i) = rbf_expand(d(i), cfg).transpose();
  }
  return out;
}

Real laplace_sample(const LaplaceParams& p, Rng& rng) {
  if (!(p.b > 0)) throw ConfigError("laplace scale b must be > 0");
  // u uniform on (-0.5, 0.5); x = mu - b*sign(u)*ln(1-2|u|)
  Real u = 0.0;
  do {
    u = rng.uniform01() - 0.5;
  } while (u <= -0.5 || u >= 0.5 || u == 0.0);
  const Real s = u > 0 ? 1.0 : -1.0;
  return p.mu - p.b * s * std::log(1.0 - 2.0 * std::abs(u));
}

Vec laplace_augment(const Vec& bond_dists, const LaplaceParams& p, Rng& rng) {
  Vec out(bond_dists.size());
  for (Eigen::Index i = 0; i < bond_dists.size(); ++i) {
    out(i) = std::max(bond_dists(i) + laplace_sample(p, rng), kMinBondDist);
  }
  return out;
}

FeaturizedGraph featurize_molecule(const MolecularGraph& g, const DatasetSchema& schema,
                                   const RbfConfig& cfg, SpatialMode mode) {
  validate_graph(g, schema);
  const int n = g.n_atoms();
  const int m = g.n_bonds();

  FeaturizedGraph fg;
  fg.id = g.id;
  fg.n_atoms = n;
  fg.node_feat = g.atom_features;
  fg.target = g.target;

  // Undirected bonds expand to directed arc pairs (u,v), (v,u).
  fg.arc_src.resize(2 * m);
  fg.arc_dst.resize(2 * m);
  fg.arc_feat.resize(2 * m, schema.bond_vocab.size());
  fg.bond_dist.resize(2 * m);
  fg.in_degree = IVec::Zero(n);
  const DistanceMatrix dist = pairwise_euclidean(g.coords);
  for (int b = 0; b < m; ++b) {
    const auto [u, v] = g.bonds[b];
    const Real d_uv = dist.d(u, v);
    fg.arc_src(2 * b) = u;
    fg.arc_dst(2 * b) = v;
    fg.arc_src(2 * b + 1) = v;
    fg.arc_dst(2 * b + 1) = u;
    if (m > 0 && schema.bond_vocab.size() > 0) {
      fg.arc_feat.row(2 * b) = g.bond_features.row(b);
      fg.arc_feat.row(2 * b + 1) = g.bond_features.row(b);
    }
    fg.bond_dist(2 * b) = d_uv;
    fg.bond_dist(2 * b + 1) = d_uv;
    fg.in_degree(u) += 1;
    fg.in_degree(v) += 1;
  }

  fg.hop = shortest_path_lengths(g);

  if (mode == SpatialMode::kEuclideanRbf) {
    fg.pair_rbf.resize(static_cast<Eigen::Index>(n) * n, cfg.n_kernels);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        fg.pair_rbf.row(static_cast<Eigen::Index>(i) * n + j) =
            rbf_expand(dist.d(i, j), cfg).transpose();
      }
    }
  }
  return fg;
}

std::vector<FeaturizedGraph> featurize_all(const std::vector<MolecularGraph>& graphs,
                                           const DatasetSchema& schema, const RbfConfig& cfg,
                                           SpatialMode mode, int workers) {
  const std::size_t n = graphs.size();
  std::vector<FeaturizedGraph> out(n);
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = featurize_molecule(graphs[i], schema, cfg, mode);
    }
    return out;
  }

  // Static index partition; each slot is written by exactly one worker, so
  // the result is identical to the serial order.
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < n;
             i += static_cast<std::size_t>(workers)) {
          out[i] = featurize_molecule(graphs[i], schema, cfg, mode);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace molprop
