#include "molprop/expc.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace molprop {

namespace ad2 = molprop::ad;
using ad2::Value;

void ExpCConfig::validate() const {
  if (n_layers < 1 || d_model < 1 || d_expand < 1) {
    throw ConfigError("expc: dimensions must be positive");
  }
  if (d_expand < d_model) {
    throw ConfigError("expc: expanded dim " + std::to_string(d_expand) +
                      " must be >= hidden dim " + std::to_string(d_model));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("expc: dropout must lie in [0, 1)");
}

ExpCConfig expc_paper_config() { return ExpCConfig{}; }

ExpCConfig expc_mini_config() {
  ExpCConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 8;
  cfg.d_expand = 16;
  cfg.dropout = 0.0;
  return cfg;
}

std::int64_t expc_param_count(const ExpCConfig& cfg, const DatasetSchema& schema) {
  const std::int64_t d = cfg.d_model, dp = cfg.d_expand;
  std::int64_t emb = 0;
  for (int v : schema.atom_vocab) emb += std::int64_t(v) * d;
  for (int v : schema.bond_vocab) emb += std::int64_t(v) * d;
  emb += 2 * d;  // virtual-node init state + virtual-edge feature
  const std::int64_t per_layer = d * dp + d * dp + dp * dp + dp + dp * d + d;
  return emb + cfg.n_layers * per_layer + d + 1;
}

ParameterStore expc_init(const ExpCConfig& cfg, const DatasetSchema& schema,
                         std::uint64_t seed) {
  cfg.validate();
  if (schema.atom_vocab.empty()) throw ConfigError("expc: schema has no atom features");
  Rng rng(seed);
  ParameterStore p;
  const Eigen::Index d = cfg.d_model, dp = cfg.d_expand;
  for (std::size_t f = 0; f < schema.atom_vocab.size(); ++f) {
    p.add("atom_emb." + std::to_string(f), init_normal(rng, schema.atom_vocab[f], d));
  }
  for (std::size_t f = 0; f < schema.bond_vocab.size(); ++f) {
    p.add("bond_emb." + std::to_string(f), init_normal(rng, schema.bond_vocab[f], d));
  }
  p.add("virt_init", init_normal(rng, 1, d));
  p.add("virt_edge", init_normal(rng, 1, d));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    p.add(pre + "w1", init_uniform_fanin(rng, d, dp));
    p.add(pre + "w2", init_uniform_fanin(rng, d, dp));
    p.add(pre + "m1", init_uniform_fanin(rng, dp, dp));
    p.add(pre + "m1_b", Mat::Zero(1, dp));
    p.add(pre + "m2", init_uniform_fanin(rng, dp, d));
    p.add(pre + "m2_b", Mat::Zero(1, d));
  }
  p.add("head_w", Mat::Zero(d, 1));
  p.add("head_b", Mat::Zero(1, 1));
  return p;
}

Mat expc_layer(const Mat& h, const IVec& arc_src, const IVec& arc_dst, const Mat& edge_states,
               const Mat& w1, const Mat& w2, const Mat& m1, const Mat& m1_b, const Mat& m2,
               const Mat& m2_b) {
  const Eigen::Index n = h.rows();
  const Eigen::Index a = arc_src.size();
  if (arc_dst.size() != a || edge_states.rows() != a) {
    throw ShapeError("expc_layer: arc list and edge states disagree on arc count");
  }
  if (edge_states.cols() != w1.rows() || h.cols() != w2.rows() || w1.cols() != w2.cols() ||
      m1.rows() != w1.cols() || m1.cols() != m1.rows() || m2.rows() != m1.cols() ||
      m1_b.cols() != m1.cols() || m2_b.cols() != m2.cols()) {
    throw ShapeError("expc_layer: parameter shapes do not chain");
  }
  for (Eigen::Index i = 0; i < a; ++i) {
    if (arc_src(i) < 0 || arc_src(i) >= n || arc_dst(i) < 0 || arc_dst(i) >= n) {
      throw ShapeError("expc_layer: arc endpoint out of range");
    }
  }

  Mat gates = (edge_states * w1).cwiseMax(Real(0));
  Mat hp = (h * w2).cwiseMax(Real(0));

  // Canonical (receiver, sender) order pins the summation sequence, so the
  // result does not depend on how the caller listed the arcs.
  std::vector<Eigen::Index> ord(static_cast<std::size_t>(a));
  std::iota(ord.begin(), ord.end(), Eigen::Index(0));
  std::sort(ord.begin(), ord.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (arc_dst(x) != arc_dst(y)) return arc_dst(x) < arc_dst(y);
    return arc_src(x) < arc_src(y);
  });

  Mat pre = hp;  // self term
  for (Eigen::Index k : ord) {
    pre.row(arc_dst(k)) += gates.row(k).cwiseProduct(hp.row(arc_src(k)));
  }
  Mat mid = pre * m1;
  mid.rowwise() += m1_b.row(0);
  mid = mid.cwiseMax(Real(0));
  Mat out = mid * m2;
  out.rowwise() += m2_b.row(0);
  return out;
}

Vec virtual_readout(const std::vector<Vec>& states) {
  if (states.empty()) throw ShapeError("virtual_readout: no recorded states");
  Vec acc = states[0];
  for (std::size_t i = 1; i < states.size(); ++i) {
    if (states[i].size() != acc.size()) {
      throw ShapeError("virtual_readout: state sizes differ");
    }
    acc += states[i];
  }
  return acc;
}

Value expc_forward(ad2::Tape& t, const ExpCConfig& cfg, const BoundParams& params,
                   const std::vector<const FeaturizedGraph*>& batch, bool train,
                   std::uint64_t dropout_seed) {
  cfg.validate();
  if (batch.empty()) throw ShapeError("expc_forward: empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = cfg.d_model;

  std::size_t n_atom_cols = 0;
  while (params.store->contains("atom_emb." + std::to_string(n_atom_cols))) ++n_atom_cols;
  std::size_t n_bond_cols = 0;
  while (params.store->contains("bond_emb." + std::to_string(n_bond_cols))) ++n_bond_cols;

  // Concatenated layout: graph g's atoms, then its virtual node.
  Eigen::Index n_total = 0, n_real_arcs = 0;
  std::vector<Eigen::Index> offset(static_cast<std::size_t>(B));
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    if (fg.n_atoms < 1) throw ShapeError("expc_forward: graph without atoms");
    if (static_cast<std::size_t>(fg.node_feat.cols()) != n_atom_cols ||
        static_cast<std::size_t>(fg.arc_feat.cols()) != n_bond_cols) {
      throw ShapeError("expc_forward: graph '" + fg.id +
                       "' feature columns do not match the model");
    }
    offset[static_cast<std::size_t>(g)] = n_total;
    n_total += fg.n_atoms + 1;
    n_real_arcs += fg.n_arcs();
  }

  // ---- node embeddings ------------------------------------------------------
  std::vector<IVec> col_idx(n_atom_cols, IVec::Zero(n_total));
  Mat real_mask = Mat::Zero(n_total, d);
  Mat virt_mask = Mat::Zero(n_total, d);
  IVec virt_rows(B);
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    const Eigen::Index off = offset[static_cast<std::size_t>(g)];
    for (int i = 0; i < fg.n_atoms; ++i) {
      real_mask.row(off + i).setOnes();
      for (std::size_t f = 0; f < n_atom_cols; ++f) {
        col_idx[f](off + i) = fg.node_feat(i, static_cast<Eigen::Index>(f));
      }
    }
    virt_rows(g) = off + fg.n_atoms;
    virt_mask.row(off + fg.n_atoms).setOnes();
  }
  Value H = ad2::embedding_lookup(params.at("atom_emb.0"), col_idx[0]);
  for (std::size_t f = 1; f < n_atom_cols; ++f) {
    H = ad2::add(H, ad2::embedding_lookup(params.at("atom_emb." + std::to_string(f)), col_idx[f]));
  }
  Value virt_full = ad2::matmul(ad2::constant(t, Mat::Ones(n_total, 1)), params.at("virt_init"));
  H = ad2::add(ad2::mul(H, ad2::constant(t, real_mask)),
               ad2::mul(virt_full, ad2::constant(t, virt_mask)));

  // ---- arcs: real bonds plus virtual wires, then canonical sort -------------
  std::vector<IVec> bond_idx(n_bond_cols, IVec::Zero(std::max<Eigen::Index>(n_real_arcs, 0)));
  Eigen::Index n_virt_arcs = 0;
  for (Eigen::Index g = 0; g < B; ++g) n_virt_arcs += 2 * batch[g]->n_atoms;
  const Eigen::Index n_arcs = n_real_arcs + n_virt_arcs;
  IVec all_src(n_arcs), all_dst(n_arcs);
  Eigen::Index ra = 0;
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    const Eigen::Index off = offset[static_cast<std::size_t>(g)];
    for (int a = 0; a < fg.n_arcs(); ++a) {
      all_src(ra) = off + fg.arc_src(a);
      all_dst(ra) = off + fg.arc_dst(a);
      for (std::size_t f = 0; f < n_bond_cols; ++f) {
        bond_idx[f](ra) = fg.arc_feat(a, static_cast<Eigen::Index>(f));
      }
      ++ra;
    }
  }
  Eigen::Index va = n_real_arcs;
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    const Eigen::Index off = offset[static_cast<std::size_t>(g)];
    const Eigen::Index virt = off + fg.n_atoms;
    for (int i = 0; i < fg.n_atoms; ++i) {
      all_src(va) = virt;
      all_dst(va) = off + i;
      ++va;
      all_src(va) = off + i;
      all_dst(va) = virt;
      ++va;
    }
  }

  Value E_all;
  if (n_real_arcs > 0) {
    Value E_real = ad2::embedding_lookup(params.at("bond_emb.0"), bond_idx[0]);
    for (std::size_t f = 1; f < n_bond_cols; ++f) {
      E_real = ad2::add(
          E_real, ad2::embedding_lookup(params.at("bond_emb." + std::to_string(f)), bond_idx[f]));
    }
    Value E_virt =
        ad2::matmul(ad2::constant(t, Mat::Ones(n_virt_arcs, 1)), params.at("virt_edge"));
    E_all = ad2::concat_rows(E_real, E_virt);
  } else {
    E_all = ad2::matmul(ad2::constant(t, Mat::Ones(n_virt_arcs, 1)), params.at("virt_edge"));
  }

  std::vector<Eigen::Index> ord(static_cast<std::size_t>(n_arcs));
  std::iota(ord.begin(), ord.end(), Eigen::Index(0));
  std::sort(ord.begin(), ord.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (all_dst(x) != all_dst(y)) return all_dst(x) < all_dst(y);
    return all_src(x) < all_src(y);
  });
  IVec perm(n_arcs), src_s(n_arcs), dst_s(n_arcs);
  for (Eigen::Index i = 0; i < n_arcs; ++i) {
    perm(i) = ord[static_cast<std::size_t>(i)];
    src_s(i) = all_src(perm(i));
    dst_s(i) = all_dst(perm(i));
  }
  Value E = ad2::gather_rows(E_all, perm);

  // ---- aggregation layers ----------------------------------------------------
  Value readout;
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto P = [&](const char* name) { return params.at("l" + std::to_string(l) + "." + name); };
    Value gates = ad2::relu(ad2::matmul(E, P("w1")));
    Value hp = ad2::relu(ad2::matmul(H, P("w2")));
    Value msgs = ad2::mul(gates, ad2::gather_rows(hp, src_s));
    Value pre = ad2::add(ad2::scatter_sum_rows(msgs, dst_s, n_total), hp);
    Value mid = ad2::relu(ad2::add_rowvec(ad2::matmul(pre, P("m1")), P("m1_b")));
    H = ad2::add_rowvec(ad2::matmul(mid, P("m2")), P("m2_b"));
    H = ad2::dropout(H, cfg.dropout, train, mix_seed({dropout_seed, 0xEC, std::uint64_t(l)}));
    if (!H.data().allFinite()) {
      throw NumericalError("expc_forward: non-finite activation after layer " +
                           std::to_string(l));
    }
    Value virt_state = ad2::gather_rows(H, virt_rows);
    readout = l == 0 ? virt_state : ad2::add(readout, virt_state);
  }
  return ad2::add_rowvec(ad2::matmul(readout, params.at("head_w")), params.at("head_b"));
}

}  // namespace molprop
