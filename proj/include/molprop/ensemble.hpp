#pragma once

#include "molprop/dataset.hpp"
#include "molprop/types.hpp"

#include <string>
#include <vector>

namespace molprop {

struct EnsembleEntry {
  std::string checkpoint;
  Real weight = 0.0;
};

/// Weighted-average combiner. Entries stay in file order; the final division
/// uses the declared normalizer, which must equal the weight sum.
struct EnsembleSpec {
  std::vector<EnsembleEntry> entries;
  Real normalizer = 0.0;
};

/// Checks weights > 0, |entries| >= 1, and sumstat: |sum(w) - normalizer| <= 1e-12.
const EnsembleSpec& validate_spec(const EnsembleSpec& spec);

EnsembleSpec load_ensemble_spec(const std::string& path);
void write_ensemble_spec(const std::string& path, const EnsembleSpec& spec);

/// preds is entries x molecules; output j = sum_i w_i * preds(i, j) / normalizer,
/// summed in entry order.
Vec ensemble_predict(const Mat& preds, const EnsembleSpec& spec);

// The submission weights: ten Graphormer runs (folds 0-7 then the two
// all-data runs) followed by eight ExpC runs (folds 0-7); they sum to 0.96.
std::vector<Real> submission_graphormer_weights();
std::vector<Real> submission_expc_weights();
inline constexpr Real kSubmissionNormalizer = 0.96;

struct InferenceResult {
  std::vector<std::string> ids;
  Vec pred;
};

/// Loads every entry's checkpoint, featurizes the dataset as each model
/// requires, runs eval-mode prediction, and combines with ensemble_predict.
/// Failures are reported with the offending entry index.
InferenceResult run_inference(const EnsembleSpec& spec, const Dataset& data,
                              int batch_size = 32, int workers = 1);

}  // namespace molprop
