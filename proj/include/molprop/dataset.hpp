#pragma once

#include "molprop/graph.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace molprop {

struct Dataset {
  DatasetSchema schema;
  std::vector<MolecularGraph> graphs;
};

/// Streams molecules from a line-delimited file whose first line is the
/// schema header. Each record is validated before the consumer sees it;
/// failures raise DataError/ValidationError with the offending line number.
void for_each_molecule(const std::filesystem::path& path,
                       const std::function<void(const DatasetSchema&, MolecularGraph&&)>& fn);

Dataset load_dataset(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const Dataset& ds);

}  // namespace molprop
