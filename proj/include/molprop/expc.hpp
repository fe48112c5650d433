#pragma once

#include "molprop/featurize.hpp"
#include "molprop/graph.hpp"
#include "molprop/params.hpp"
#include "molprop/tape.hpp"

#include <cstdint>
#include <vector>

namespace molprop {

struct ExpCConfig {
  int n_layers = 5;
  int d_model = 600;      // node/edge embedding width
  int d_expand = 1200;    // expanded aggregation width, >= d_model
  Real dropout = 0.0;

  void validate() const;
};

ExpCConfig expc_paper_config();
ExpCConfig expc_mini_config();

std::int64_t expc_param_count(const ExpCConfig& cfg, const DatasetSchema& schema);

ParameterStore expc_init(const ExpCConfig& cfg, const DatasetSchema& schema, std::uint64_t seed);

/// One plain (tape-free) aggregation layer over explicit arcs, the reference
/// the batched forward is checked against. Gates are relu(e W1); neighbor
/// states relu(h W2); each node gets MLP(sum_in gate .* sender + self).
Mat expc_layer(const Mat& h, const IVec& arc_src, const IVec& arc_dst, const Mat& edge_states,
               const Mat& w1, const Mat& w2, const Mat& m1, const Mat& m1_b, const Mat& m2,
               const Mat& m2_b);

/// Element-wise sum of the recorded per-layer virtual-node states.
Vec virtual_readout(const std::vector<Vec>& states);

/// Batched forward: concatenates graphs, appends one virtual node per graph
/// wired to all its atoms in both directions, records the virtual state after
/// every layer, and applies the linear head to the summed states.
/// Returns a (batch, 1) prediction column.
ad::Value expc_forward(ad::Tape& tape, const ExpCConfig& cfg, const BoundParams& params,
                       const std::vector<const FeaturizedGraph*>& batch, bool train,
                       std::uint64_t dropout_seed);

}  // namespace molprop
