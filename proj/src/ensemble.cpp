#include "molprop/ensemble.hpp"

#include "molprop/expc.hpp"
#include "molprop/featurize.hpp"
#include "molprop/graphormer.hpp"
#include "molprop/params.hpp"
#include "molprop/serialize.hpp"
#include "molprop/train.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace molprop {

const EnsembleSpec& validate_spec(const EnsembleSpec& spec) {
  if (spec.entries.empty()) throw ConfigError("ensemble spec: no entries");
  Real sum = 0;
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    const Real w = spec.entries[i].weight;
    if (!(w > 0)) {
      throw ConfigError("ensemble spec: entry " + std::to_string(i) +
                        " has nonpositive weight " + std::to_string(w));
    }
    sum += w;
  }
  if (std::abs(sum - spec.normalizer) > 1e-12) {
    throw ConfigError("ensemble spec: weights sum to " + std::to_string(sum) +
                      " but normalizer is " + std::to_string(spec.normalizer));
  }
  return spec;
}

EnsembleSpec load_ensemble_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(0, "cannot open ensemble spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(0, std::string("ensemble spec is not valid JSON: ") + e.what());
  }
  EnsembleSpec spec;
  try {
    spec.normalizer = j.at("normalizer").get<Real>();
    for (const auto& e : j.at("entries")) {
      spec.entries.push_back(
          {e.at("checkpoint").get<std::string>(), e.at("weight").get<Real>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(0, std::string("malformed ensemble spec: ") + e.what());
  }
  validate_spec(spec);
  return spec;
}

void write_ensemble_spec(const std::string& path, const EnsembleSpec& spec) {
  nlohmann::json j;
  j["normalizer"] = spec.normalizer;
  j["entries"] = nlohmann::json::array();
  for (const EnsembleEntry& e : spec.entries) {
    j["entries"].push_back({{"checkpoint", e.checkpoint}, {"weight", e.weight}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(0, "cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

Vec ensemble_predict(const Mat& preds, const EnsembleSpec& spec) {
  validate_spec(spec);
  if (preds.rows() != static_cast<Eigen::Index>(spec.entries.size())) {
    throw ShapeError("ensemble_predict: " + std::to_string(preds.rows()) +
                     " prediction rows for " + std::to_string(spec.entries.size()) +
                     " entries");
  }
  Vec out = Vec::Zero(preds.cols());
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    out += spec.entries[i].weight * preds.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out / spec.normalizer;
}

std::vector<Real> submission_graphormer_weights() {
  return {0.05, 0.05, 0.05, 0.08, 0.05, 0.08, 0.08, 0.05, 0.05, 0.08};
}

std::vector<Real> submission_expc_weights() {
  return {0.05, 0.05, 0.05, 0.03, 0.05, 0.03, 0.05, 0.03};
}

InferenceResult run_inference(const EnsembleSpec& spec, const Dataset& data, int batch_size,
                              int workers) {
  validate_spec(spec);
  InferenceResult res;
  res.ids.reserve(data.graphs.size());
  for (const MolecularGraph& g : data.graphs) res.ids.push_back(g.id);
  if (data.graphs.empty()) {
    res.pred = Vec(0);
    return res;
  }

  // Featurizations shared between entries that need the same view of the data.
  std::map<std::string, std::vector<FeaturizedGraph>> feat_cache;
  auto featurized = [&](SpatialMode mode, const RbfConfig& rbf) -> const std::vector<FeaturizedGraph>& {
    std::string key = std::string(to_string(mode));
    if (mode == SpatialMode::kEuclideanRbf) {
      key += ":" + std::to_string(rbf.n_kernels) + ":" + std::to_string(rbf.center_min) + ":" +
             std::to_string(rbf.center_max);
    }
    auto it = feat_cache.find(key);
    if (it == feat_cache.end()) {
      it = feat_cache.emplace(key, featurize_all(data.graphs, data.schema, rbf, mode, workers))
               .first;
    }
    return it->second;
  };

  Mat preds(static_cast<Eigen::Index>(spec.entries.size()),
            static_cast<Eigen::Index>(data.graphs.size()));
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    try {
      auto [meta_str, params] = load_checkpoint(spec.entries[i].checkpoint);
      const nlohmann::json meta = nlohmann::json::parse(meta_str);
      const DatasetSchema ckpt_schema = meta.at("schema").get<DatasetSchema>();
      if (!(ckpt_schema == data.schema)) {
        throw ConfigError("checkpoint schema does not match the dataset");
      }
      const std::string model = meta.at("model").get<std::string>();
      Vec p;
      if (model == "graphormer") {
        const GraphormerConfig cfg = meta.at("config").get<GraphormerConfig>();
        const auto& feats = featurized(cfg.spatial, cfg.rbf());
        GraphRefs refs;
        refs.reserve(feats.size());
        for (const FeaturizedGraph& fg : feats) refs.push_back(&fg);
        p = predict_graphormer(cfg, params, refs, batch_size);
      } else if (model == "expc") {
        const ExpCConfig cfg = meta.at("config").get<ExpCConfig>();
        const auto& feats = featurized(SpatialMode::kHop, make_rbf_config());
        GraphRefs refs;
        refs.reserve(feats.size());
        for (const FeaturizedGraph& fg : feats) refs.push_back(&fg);
        p = predict_expc(cfg, params, refs, batch_size);
      } else {
        throw ConfigError("unknown model kind '" + model + "'");
      }
      preds.row(static_cast<Eigen::Index>(i)) = p.transpose();
    } catch (const NumericalError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("ensemble entry " + std::to_string(i) + " (" +
                        spec.entries[i].checkpoint + "): bad checkpoint metadata: " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError("ensemble entry " + std::to_string(i) + " (" +
                        spec.entries[i].checkpoint + "): " + e.what());
    }
  }
  res.pred = ensemble_predict(preds, spec);
  return res;
}

}  // namespace molprop
