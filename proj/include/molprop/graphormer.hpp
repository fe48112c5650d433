#pragma once

#include "molprop/featurize.hpp"
#include "molprop/graph.hpp"
#include "molprop/params.hpp"
#include "molprop/tape.hpp"

#include <cstdint>
#include <vector>

namespace molprop {

struct GraphormerConfig {
  int n_layers = 12;
  int d_model = 768;
  int n_heads = 32;
  int head_dim = 24;        // d_model / n_heads
  int ffn_dim = 768;
  int n_rbf = 256;          // Gaussian kernels over pair distances
  Real rbf_min = 0.0;
  Real rbf_max = 10.0;
  int degree_buckets = 512; // in-degree embedding rows, clamped above
  int hop_buckets = 512;    // hop-mode distance rows; last row = unreachable
  Real ffn_dropout = 0.1;
  Real attn_dropout = 0.1;
  Real embed_dropout = 0.0;
  Real ln_eps = 1e-5;
  SpatialMode spatial = SpatialMode::kEuclideanRbf;

  RbfConfig rbf() const { return make_rbf_config(n_rbf, rbf_min, rbf_max); }
  void validate() const;
};

GraphormerConfig graphormer_paper_config();
GraphormerConfig graphormer_mini_config();

/// Exact number of trainable scalars graphormer_init will allocate:
///   embeddings: sum_f vocab_f*d + degree_buckets*d + d (graph token)
///   spatial:    K*H + H (euclidean projection + offset)  or  hop_buckets*H
///   edges:      K*H (bond-length projection) + H (graph-token border)
///   per layer:  4*(d*d + d) attention, 4*d two layer norms,
///               d*F + F + F*d + d feed-forward
///   output:     2*d final layer norm + d + 1 linear head
std::int64_t graphormer_param_count(const GraphormerConfig& cfg, const DatasetSchema& schema);

ParameterStore graphormer_init(const GraphormerConfig& cfg, const DatasetSchema& schema,
                               std::uint64_t seed);

/// Plain (tape-free) per-head spatial bias for one graph, used as the
/// reference the batched forward is checked against.
Mat spatial_bias_matrix(const FeaturizedGraph& fg, const Mat& proj, const Mat& offset, int head);

struct GraphormerDiag {
  Real max_attn_rowsum_err = 0.0;  // |sum - 1| over valid query rows, pre-dropout
};

/// Batched forward pass: pads graphs to a common size, prepends the graph
/// token, runs the encoder, and reads the regression head off the token.
/// Returns a (batch, 1) prediction column.
ad::Value graphormer_forward(ad::Tape& tape, const GraphormerConfig& cfg,
                             const BoundParams& params,
                             const std::vector<const FeaturizedGraph*>& batch, bool train,
                             std::uint64_t dropout_seed, GraphormerDiag* diag = nullptr);

}  // namespace molprop
