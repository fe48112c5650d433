#pragma once

#include "molprop/featurize.hpp"

#include <filesystem>
#include <vector>

namespace molprop {

/// Header metadata identifying how a cache was produced; reloading under a
/// different configuration is rejected.
struct FeatureCacheMeta {
  DatasetSchema schema;
  RbfConfig rbf;
  SpatialMode mode = SpatialMode::kEuclideanRbf;

  bool operator==(const FeatureCacheMeta&) const = default;
};

/// Versioned binary container: magic, JSON meta, then per-molecule records
/// with dimension prefixes and little-endian 64-bit payloads.
void write_feature_cache(const std::filesystem::path& path, const FeatureCacheMeta& meta,
                         const std::vector<FeaturizedGraph>& records);

std::pair<FeatureCacheMeta, std::vector<FeaturizedGraph>> read_feature_cache(
    const std::filesystem::path& path);

}  // namespace molprop
