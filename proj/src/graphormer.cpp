#include "molprop/graphormer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace molprop {

namespace ad2 = molprop::ad;
using ad2::Value;

void GraphormerConfig::validate() const {
  if (n_layers < 0 || d_model < 1 || n_heads < 1 || head_dim < 1 || ffn_dim < 1) {
    throw ConfigError("graphormer: dimensions must be positive");
  }
  if (n_heads * head_dim != d_model) {
    throw ConfigError("graphormer: n_heads (" + std::to_string(n_heads) + ") * head_dim (" +
                      std::to_string(head_dim) + ") must equal d_model (" +
                      std::to_string(d_model) + ")");
  }
  if (degree_buckets < 1 || hop_buckets < 2) {
    throw ConfigError("graphormer: embedding bucket counts too small");
  }
  for (Real p : {ffn_dropout, attn_dropout, embed_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("graphormer: dropout must lie in [0, 1)");
  }
  rbf().validate();
}

GraphormerConfig graphormer_paper_config() { return GraphormerConfig{}; }

GraphormerConfig graphormer_mini_config() {
  GraphormerConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.head_dim = 4;
  cfg.ffn_dim = 16;
  cfg.n_rbf = 8;
  cfg.degree_buckets = 16;
  cfg.hop_buckets = 16;
  cfg.ffn_dropout = 0.0;
  cfg.attn_dropout = 0.0;
  cfg.embed_dropout = 0.0;
  return cfg;
}

std::int64_t graphormer_param_count(const GraphormerConfig& cfg, const DatasetSchema& schema) {
  const std::int64_t d = cfg.d_model, K = cfg.n_rbf, H = cfg.n_heads, F = cfg.ffn_dim;
  std::int64_t emb = 0;
  for (int v : schema.atom_vocab) emb += std::int64_t(v) * d;
  emb += std::int64_t(cfg.degree_buckets) * d + d;
  const std::int64_t spatial =
      cfg.spatial == SpatialMode::kEuclideanRbf ? K * H + H : std::int64_t(cfg.hop_buckets) * H;
  const std::int64_t edges = K * H + H;  // bond projection + graph-token border
  const std::int64_t per_layer = 4 * (d * d + d) + 4 * d + d * F + F + F * d + d;
  const std::int64_t output = 2 * d + d + 1;
  return emb + spatial + edges + cfg.n_layers * per_layer + output;
}

ParameterStore graphormer_init(const GraphormerConfig& cfg, const DatasetSchema& schema,
                               std::uint64_t seed) {
  cfg.validate();
  if (schema.atom_vocab.empty()) throw ConfigError("graphormer: schema has no atom features");
  Rng rng(seed);
  ParameterStore p;
  const Eigen::Index d = cfg.d_model, H = cfg.n_heads, K = cfg.n_rbf, F = cfg.ffn_dim;

  for (std::size_t f = 0; f < schema.atom_vocab.size(); ++f) {
    p.add("atom_emb." + std::to_string(f), init_normal(rng, schema.atom_vocab[f], d));
  }
  p.add("degree_emb", init_normal(rng, cfg.degree_buckets, d));
  p.add("graph_token", init_normal(rng, 1, d));
  if (cfg.spatial == SpatialMode::kEuclideanRbf) {
    p.add("spatial_proj", init_normal(rng, K, H));
    p.add("spatial_offset", Mat::Zero(1, H));
  } else {
    p.add("hop_emb", init_normal(rng, cfg.hop_buckets, H));
  }
  p.add("edge_proj", init_normal(rng, K, H));
  p.add("token_bias", Mat::Zero(1, H));

  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    p.add(pre + "ln1_gamma", Mat::Ones(1, d));
    p.add(pre + "ln1_beta", Mat::Zero(1, d));
    p.add(pre + "wq", init_uniform_fanin(rng, d, d));
    p.add(pre + "bq", Mat::Zero(1, d));
    p.add(pre + "wk", init_uniform_fanin(rng, d, d));
    p.add(pre + "bk", Mat::Zero(1, d));
    p.add(pre + "wv", init_uniform_fanin(rng, d, d));
    p.add(pre + "bv", Mat::Zero(1, d));
    p.add(pre + "wo", init_uniform_fanin(rng, d, d));
    p.add(pre + "bo", Mat::Zero(1, d));
    p.add(pre + "ln2_gamma", Mat::Ones(1, d));
    p.add(pre + "ln2_beta", Mat::Zero(1, d));
    p.add(pre + "w1", init_uniform_fanin(rng, d, F));
    p.add(pre + "b1", Mat::Zero(1, F));
    p.add(pre + "w2", init_uniform_fanin(rng, F, d));
    p.add(pre + "b2", Mat::Zero(1, d));
  }
  p.add("final_ln_gamma", Mat::Ones(1, d));
  p.add("final_ln_beta", Mat::Zero(1, d));
  p.add("head_w", Mat::Zero(d, 1));
  p.add("head_b", Mat::Zero(1, 1));
  return p;
}

Mat spatial_bias_matrix(const FeaturizedGraph& fg, const Mat& proj, const Mat& offset, int head) {
  const Eigen::Index n = fg.n_atoms;
  if (fg.pair_rbf.rows() != n * n || fg.pair_rbf.cols() != proj.rows()) {
    throw ShapeError("spatial_bias_matrix: pair features do not match projection");
  }
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) = fg.pair_rbf.row(i * n + j).dot(proj.col(head)) + offset(0, head);
    }
  }
  return out;
}

namespace {

// Negative enough that exp(x - max) underflows to exactly 0 for masked keys.
constexpr Real kMaskValue = -1e30;

// Embeds an n x n block at offset (1, 1) of an S x S zero matrix.
Value pad_inner_block(ad2::Tape& t, Value core, Eigen::Index S) {
  const Eigen::Index n = core.rows();
  Value mid = ad2::concat_cols(ad2::constant(t, Mat::Zero(n, 1)), core);
  if (S - 1 - n > 0) mid = ad2::concat_cols(mid, ad2::constant(t, Mat::Zero(n, S - 1 - n)));
  Value out = ad2::concat_rows(ad2::constant(t, Mat::Zero(1, S)), mid);
  if (S - 1 - n > 0) out = ad2::concat_rows(out, ad2::constant(t, Mat::Zero(S - 1 - n, S)));
  return out;
}

}  // namespace

Value graphormer_forward(ad2::Tape& t, const GraphormerConfig& cfg, const BoundParams& params,
                         const std::vector<const FeaturizedGraph*>& batch, bool train,
                         std::uint64_t dropout_seed, GraphormerDiag* diag) {
  cfg.validate();
  if (batch.empty()) throw ShapeError("graphormer_forward: empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = cfg.d_model, H = cfg.n_heads, hd = cfg.head_dim;
  const RbfConfig rbf_cfg = cfg.rbf();

  std::size_t n_atom_cols = 0;
  while (params.store->contains("atom_emb." + std::to_string(n_atom_cols))) ++n_atom_cols;

  Eigen::Index n_max = 0;
  for (const FeaturizedGraph* fg : batch) {
    if (fg->n_atoms < 1) throw ShapeError("graphormer_forward: graph without atoms");
    if (static_cast<std::size_t>(fg->node_feat.cols()) != n_atom_cols) {
      throw ShapeError("graphormer_forward: graph has " + std::to_string(fg->node_feat.cols()) +
                       " atom feature columns, model expects " + std::to_string(n_atom_cols));
    }
    if (cfg.spatial == SpatialMode::kEuclideanRbf) {
      if (fg->pair_rbf.rows() != Eigen::Index(fg->n_atoms) * fg->n_atoms ||
          fg->pair_rbf.cols() != cfg.n_rbf) {
        throw ConfigError("graphormer_forward: graph '" + fg->id +
                          "' was not featurized in euclidean-rbf mode with " +
                          std::to_string(cfg.n_rbf) + " kernels");
      }
    } else if (fg->hop.h.rows() != fg->n_atoms) {
      throw ConfigError("graphormer_forward: graph '" + fg->id + "' lacks a hop matrix");
    }
    n_max = std::max(n_max, Eigen::Index(fg->n_atoms));
  }
  const Eigen::Index S = 1 + n_max;  // graph token + padded atom slots
  const Eigen::Index NS = B * S;

  // ---- input embeddings over the padded, stacked layout --------------------
  std::vector<IVec> col_idx(n_atom_cols, IVec::Zero(NS));
  IVec deg_idx = IVec::Zero(NS);
  Mat atom_mask = Mat::Zero(NS, d);   // 1-rows at real atom slots
  Mat token_mask = Mat::Zero(NS, d);  // 1-rows at graph-token slots
  IVec token_rows(B);
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    token_rows(g) = g * S;
    token_mask.row(g * S).setOnes();
    for (int i = 0; i < fg.n_atoms; ++i) {
      const Eigen::Index row = g * S + 1 + i;
      atom_mask.row(row).setOnes();
      for (std::size_t f = 0; f < n_atom_cols; ++f) {
        col_idx[f](row) = fg.node_feat(i, static_cast<Eigen::Index>(f));
      }
      deg_idx(row) = std::min<std::int64_t>(fg.in_degree(i), cfg.degree_buckets - 1);
    }
  }
  Value X = ad2::embedding_lookup(params.at("atom_emb.0"), col_idx[0]);
  for (std::size_t f = 1; f < n_atom_cols; ++f) {
    X = ad2::add(X, ad2::embedding_lookup(params.at("atom_emb." + std::to_string(f)), col_idx[f]));
  }
  X = ad2::add(X, ad2::embedding_lookup(params.at("degree_emb"), deg_idx));
  Value token_rows_full =
      ad2::matmul(ad2::constant(t, Mat::Ones(NS, 1)), params.at("graph_token"));
  X = ad2::add(ad2::mul(X, ad2::constant(t, atom_mask)),
               ad2::mul(token_rows_full, ad2::constant(t, token_mask)));
  X = ad2::dropout(X, cfg.embed_dropout, train, mix_seed({dropout_seed, 0xE0ull}));

  // ---- attention bias, one S x S matrix per (graph, head), layer-shared ----
  std::vector<std::vector<Value>> bias(static_cast<std::size_t>(B));
  for (Eigen::Index g = 0; g < B; ++g) {
    const FeaturizedGraph& fg = *batch[g];
    const Eigen::Index n = fg.n_atoms;

    Value spat_flat;  // (n*n, H)
    if (cfg.spatial == SpatialMode::kEuclideanRbf) {
      spat_flat = ad2::add_rowvec(
          ad2::matmul(ad2::constant(t, fg.pair_rbf), params.at("spatial_proj")),
          params.at("spatial_offset"));
    } else {
      IVec hop_idx(n * n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const std::int64_t hops = fg.hop.h(i, j);
          hop_idx(i * n + j) = hops < 0 ? cfg.hop_buckets - 1
                                        : std::min<std::int64_t>(hops, cfg.hop_buckets - 2);
        }
      }
      spat_flat = ad2::embedding_lookup(params.at("hop_emb"), hop_idx);
    }
    Value edge_flat =
        ad2::matmul(ad2::constant(t, rbf_expand(fg.bond_dist, rbf_cfg)), params.at("edge_proj"));

    Mat key_mask(S, S);  // 0 at attendable keys, very negative at padding
    key_mask.setConstant(kMaskValue);
    key_mask.leftCols(1 + n).setZero();
    Mat border = Mat::Zero(S, S);  // graph-token row/column pattern
    border(0, 0) = 1.0;
    for (Eigen::Index j = 1; j <= n; ++j) {
      border(0, j) = 1.0;
      border(j, 0) = 1.0;
    }

    bias[static_cast<std::size_t>(g)].reserve(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
      Value core = ad2::reshape(ad2::slice_cols(spat_flat, h, 1), n, n);
      Value edge_mat = ad2::scatter_entries(ad2::slice_cols(edge_flat, h, 1), fg.arc_src,
                                            fg.arc_dst, n, n);
      core = ad2::add(core, edge_mat);
      Value token_term =
          ad2::mul(ad2::broadcast_scalar(ad2::slice_cols(params.at("token_bias"), h, 1), S, S),
                   ad2::constant(t, border));
      Value b = ad2::add(ad2::constant(t, key_mask), token_term);
      b = ad2::add(b, pad_inner_block(t, core, S));
      bias[static_cast<std::size_t>(g)].push_back(b);
    }
  }

  // ---- encoder ---------------------------------------------------------------
  const Real inv_sqrt_hd = Real(1) / std::sqrt(static_cast<Real>(hd));
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto P = [&](const char* name) { return params.at("l" + std::to_string(l) + "." + name); };

    Value pre = ad2::layer_norm_rows(X, P("ln1_gamma"), P("ln1_beta"), cfg.ln_eps);
    Value Q = ad2::add_rowvec(ad2::matmul(pre, P("wq")), P("bq"));
    Value Km = ad2::add_rowvec(ad2::matmul(pre, P("wk")), P("bk"));
    Value V = ad2::add_rowvec(ad2::matmul(pre, P("wv")), P("bv"));

    Value ctx_all;
    for (Eigen::Index g = 0; g < B; ++g) {
      Value qg = ad2::slice_rows(Q, g * S, S);
      Value kg = ad2::slice_rows(Km, g * S, S);
      Value vg = ad2::slice_rows(V, g * S, S);
      Value ctx_g;
      for (Eigen::Index h = 0; h < H; ++h) {
        Value qh = ad2::slice_cols(qg, h * hd, hd);
        Value kh = ad2::slice_cols(kg, h * hd, hd);
        Value vh = ad2::slice_cols(vg, h * hd, hd);
        Value logits = ad2::scale(ad2::matmul(qh, ad2::transpose(kh)), inv_sqrt_hd);
        logits = ad2::add(logits, bias[static_cast<std::size_t>(g)][static_cast<std::size_t>(h)]);
        Value attn = ad2::softmax_rows(logits);
        if (diag) {
          const Mat& a = attn.data();
          const Eigen::Index valid = 1 + batch[g]->n_atoms;
          for (Eigen::Index r = 0; r < valid; ++r) {
            diag->max_attn_rowsum_err =
                std::max(diag->max_attn_rowsum_err, std::abs(a.row(r).sum() - Real(1)));
          }
        }
        attn = ad2::dropout(attn, cfg.attn_dropout, train,
                            mix_seed({dropout_seed, 0xA7ull, std::uint64_t(l), std::uint64_t(g),
                                      std::uint64_t(h)}));
        Value ctx_h = ad2::matmul(attn, vh);
        ctx_g = h == 0 ? ctx_h : ad2::concat_cols(ctx_g, ctx_h);
      }
      ctx_all = g == 0 ? ctx_g : ad2::concat_rows(ctx_all, ctx_g);
    }
    Value attn_out = ad2::add_rowvec(ad2::matmul(ctx_all, P("wo")), P("bo"));
    attn_out = ad2::dropout(attn_out, cfg.ffn_dropout, train,
                            mix_seed({dropout_seed, 0xF1ull, std::uint64_t(l)}));
    X = ad2::add(X, attn_out);

    Value pre2 = ad2::layer_norm_rows(X, P("ln2_gamma"), P("ln2_beta"), cfg.ln_eps);
    Value ff = ad2::relu(ad2::add_rowvec(ad2::matmul(pre2, P("w1")), P("b1")));
    ff = ad2::dropout(ff, cfg.ffn_dropout, train,
                      mix_seed({dropout_seed, 0xF2ull, std::uint64_t(l)}));
    ff = ad2::add_rowvec(ad2::matmul(ff, P("w2")), P("b2"));
    ff = ad2::dropout(ff, cfg.ffn_dropout, train,
                      mix_seed({dropout_seed, 0xF3ull, std::uint64_t(l)}));
    X = ad2::add(X, ff);

    if (!X.data().allFinite()) {
      throw NumericalError("graphormer_forward: non-finite activation after layer " +
                           std::to_string(l));
    }
  }

  X = ad2::layer_norm_rows(X, params.at("final_ln_gamma"), params.at("final_ln_beta"),
                           cfg.ln_eps);
  Value token_repr = ad2::gather_rows(X, token_rows);
  return ad2::add_rowvec(ad2::matmul(token_repr, params.at("head_w")), params.at("head_b"));
}

}  // namespace molprop
