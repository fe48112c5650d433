#pragma once

#include "molprop/expc.hpp"
#include "molprop/featurize.hpp"
#include "molprop/graphormer.hpp"
#include "molprop/params.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace molprop {

struct GraphormerTrainConfig {
  std::int64_t max_steps = 1'500'000;
  Real peak_lr = 2e-4;
  int batch_size = 1024;
  std::int64_t warmup_steps = 10'000;
  Real adam_beta1 = 0.9;
  Real adam_beta2 = 0.999;
  Real adam_eps = 1e-8;
  Real grad_clip_norm = 5.0;   // <= 0 disables clipping
  Real weight_decay = 0.0;     // kept at zero; no decoupled term is applied
  std::int64_t eval_interval = 500;

  void validate() const;
};

struct ExpCTrainConfig {
  int max_epochs = 100;
  int batch_size = 256;
  Real peak_lr = 1e-4;
  Real adam_beta1 = 0.9;
  Real adam_beta2 = 0.999;
  Real adam_eps = 1e-8;
  Real lr_decay_rate = 0.75;
  int lr_decay_step = 20;      // epochs per decay
  Real grad_clip_norm = 0.0;
  Real weight_decay = 0.0;
  int eval_interval = 1;       // epochs

  void validate() const;
};

GraphormerTrainConfig graphormer_paper_train_config();
GraphormerTrainConfig graphormer_mini_train_config();
ExpCTrainConfig expc_paper_train_config();
ExpCTrainConfig expc_mini_train_config();

// ---- loss and schedules -----------------------------------------------------

Real mae(const Vec& pred, const Vec& target);
ad::Value mae_loss(ad::Value pred, const Vec& target);  // mean |pred - target|

/// Linear ramp 0 -> peak over warmup_steps, then linear decay to 0 at
/// max_steps. Steps outside [0, max_steps] are an error.
Real lr_linear_warmup_decay(std::int64_t step, const GraphormerTrainConfig& cfg);

/// peak * decay_rate^floor(epoch / decay_step), computed by exact repeated
/// multiplication.
Real lr_step_decay(std::int64_t epoch, const ExpCTrainConfig& cfg);

// ---- optimizer ---------------------------------------------------------------

struct AdamState {
  std::int64_t step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;
};

AdamState adam_init(const ParameterStore& params);
void adam_step(ParameterStore& params, const std::vector<Mat>& grads, AdamState& state, Real lr,
               Real beta1, Real beta2, Real eps);

/// Scales grads so the global L2 norm does not exceed max_norm; returns the
/// pre-clip norm. max_norm <= 0 disables clipping.
Real clip_grad_norm(std::vector<Mat>& grads, Real max_norm = 5.0);

// ---- cross-validation ---------------------------------------------------------

struct FoldPlan {
  int n_folds = 8;
  std::vector<std::string> ids;   // seeded-shuffle order
  std::vector<int> fold;          // fold[i] is ids[i]'s fold

  int fold_of(const std::string& id) const;
  std::vector<std::string> ids_in_fold(int f) const;
  std::vector<std::string> ids_not_in_fold(int f) const;
};

FoldPlan kfold_split(const std::vector<std::string>& ids, int n_folds, std::uint64_t seed);

// ---- fit / evaluate ------------------------------------------------------------

struct MetricPoint {
  std::int64_t step = 0;  // optimizer step (Graphormer) or epoch (ExpC)
  Real lr = 0.0;          // learning rate of the most recent update
  Real train_mae = 0.0;
  std::optional<Real> val_mae;
};

struct FitResult {
  ParameterStore params;          // best-validation checkpoint; last when no val set
  std::vector<MetricPoint> history;
  Real final_train_mae = 0.0;
  std::optional<Real> best_val_mae;
  std::int64_t steps_run = 0;
};

using GraphRefs = std::vector<const FeaturizedGraph*>;

Vec predict_graphormer(const GraphormerConfig& cfg, const ParameterStore& params,
                       const GraphRefs& data, int batch_size);
Vec predict_expc(const ExpCConfig& cfg, const ParameterStore& params, const GraphRefs& data,
                 int batch_size);

Real evaluate_mae_graphormer(const GraphormerConfig& cfg, const ParameterStore& params,
                             const GraphRefs& data, int batch_size);
Real evaluate_mae_expc(const ExpCConfig& cfg, const ParameterStore& params, const GraphRefs& data,
                       int batch_size);

/// Step loop with per-epoch reshuffling and per-epoch Laplace resampling of
/// bond distances (augment=true). Validation is skipped when val is empty
/// (the "train on everything" runs). metrics_out, when set, receives one JSON
/// line per evaluation.
FitResult fit_graphormer(const GraphormerConfig& cfg, const GraphormerTrainConfig& tcfg,
                         const DatasetSchema& schema, const GraphRefs& train,
                         const GraphRefs& val, std::uint64_t seed, bool augment = true,
                         const LaplaceParams& laplace = {}, std::ostream* metrics_out = nullptr);

FitResult fit_expc(const ExpCConfig& cfg, const ExpCTrainConfig& tcfg,
                   const DatasetSchema& schema, const GraphRefs& train, const GraphRefs& val,
                   std::uint64_t seed, std::ostream* metrics_out = nullptr);

}  // namespace molprop
