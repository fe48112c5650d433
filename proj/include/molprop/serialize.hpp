#pragma once

#include "molprop/expc.hpp"
#include "molprop/featurize.hpp"
#include "molprop/graph.hpp"
#include "molprop/graphormer.hpp"
#include "molprop/train.hpp"

#include <json.hpp>

namespace molprop {

// nlohmann ADL hooks so configs embed directly in checkpoint metadata and
// run manifests.

void to_json(nlohmann::json& j, const DatasetSchema& s);
void from_json(const nlohmann::json& j, DatasetSchema& s);

void to_json(nlohmann::json& j, const GraphormerConfig& c);
void from_json(const nlohmann::json& j, GraphormerConfig& c);

void to_json(nlohmann::json& j, const ExpCConfig& c);
void from_json(const nlohmann::json& j, ExpCConfig& c);

void to_json(nlohmann::json& j, const GraphormerTrainConfig& c);
void from_json(const nlohmann::json& j, GraphormerTrainConfig& c);

void to_json(nlohmann::json& j, const ExpCTrainConfig& c);
void from_json(const nlohmann::json& j, ExpCTrainConfig& c);

/// Checkpoint metadata: {"model": "graphormer"|"expc", "config": ...,
/// "schema": ..., "seed": ...}. Helpers shared by the CLI and ensemble code.
std::string checkpoint_meta_graphormer(const GraphormerConfig& cfg, const DatasetSchema& schema,
                                       std::uint64_t seed);
std::string checkpoint_meta_expc(const ExpCConfig& cfg, const DatasetSchema& schema,
                                 std::uint64_t seed);

}  // namespace molprop
