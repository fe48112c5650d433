#include "molprop/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace molprop {

namespace {

using nlohmann::json;

DatasetSchema parse_schema(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(1, std::string("schema header is not valid JSON: ") + e.what());
  }
  if (!j.contains("atom_vocab_sizes") || !j.contains("bond_vocab_sizes")) {
    throw DataError(1, "schema header must declare atom_vocab_sizes and bond_vocab_sizes");
  }
  DatasetSchema schema;
  schema.atom_vocab = j.at("atom_vocab_sizes").get<std::vector<int>>();
  schema.bond_vocab = j.at("bond_vocab_sizes").get<std::vector<int>>();
  for (int v : schema.atom_vocab) {
    if (v < 1) throw DataError(1, "atom vocabulary sizes must be positive");
  }
  for (int v : schema.bond_vocab) {
    if (v < 1) throw DataError(1, "bond vocabulary sizes must be positive");
  }
  return schema;
}

IMat parse_index_matrix(const json& j, Eigen::Index cols, long line, const char* field) {
  if (!j.is_array()) throw DataError(line, std::string(field) + " must be an array");
  IMat out(static_cast<Eigen::Index>(j.size()), cols);
  Eigen::Index r = 0;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(line, std::string(field) + " row " + std::to_string(r) + " must have " +
                                std::to_string(cols) + " entries");
    }
    Eigen::Index c = 0;
    for (const auto& x : row) {
      if (!x.is_number_integer()) {
        throw DataError(line, std::string(field) + " entries must be integers");
      }
      out(r, c++) = x.get<std::int64_t>();
    }
    ++r;
  }
  return out;
}

MolecularGraph parse_record(const std::string& text, long line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(line, std::string("malformed record: ") + e.what());
  }
  for (const char* field : {"id", "atom_features", "bonds", "bond_features", "coords"}) {
    if (!j.contains(field)) {
      throw DataError(line, std::string("record missing field ") + field);
    }
  }

  MolecularGraph g;
  g.id = j.at("id").get<std::string>();

  const auto& atoms = j.at("atom_features");
  const Eigen::Index n_fields =
      atoms.empty() ? 0 : static_cast<Eigen::Index>(atoms.front().size());
  g.atom_features = parse_index_matrix(atoms, n_fields, line, "atom_features");

  for (const auto& b : j.at("bonds")) {
    if (!b.is_array() || b.size() != 2) {
      throw DataError(line, "bonds entries must be [u, v] pairs");
    }
    g.bonds.emplace_back(b[0].get<int>(), b[1].get<int>());
  }

  const auto& bf = j.at("bond_features");
  const Eigen::Index n_bf = bf.empty() ? 0 : static_cast<Eigen::Index>(bf.front().size());
  g.bond_features = parse_index_matrix(bf, n_bf, line, "bond_features");
  if (g.bond_features.rows() != static_cast<Eigen::Index>(g.bonds.size())) {
    throw DataError(line, "bond_features must align with bonds");
  }

  const auto& coords = j.at("coords");
  g.coords.resize(static_cast<Eigen::Index>(coords.size()), 3);
  Eigen::Index r = 0;
  for (const auto& row : coords) {
    if (!row.is_array() || row.size() != 3) {
      throw DataError(line, "coords entries must be [x, y, z]");
    }
    for (int c = 0; c < 3; ++c) g.coords(r, c) = row[c].get<Real>();
    ++r;
  }
  if (g.coords.rows() != g.atom_features.rows()) {
    throw DataError(line, "coords must align with atom_features");
  }

  if (j.contains("target") && !j.at("target").is_null()) {
    g.target = j.at("target").get<Real>();
  }
  return g;
}

}  // namespace

void for_each_molecule(const std::filesystem::path& path,
                       const std::function<void(const DatasetSchema&, MolecularGraph&&)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError(0, "cannot open dataset: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(1, "dataset has no schema header");
  const DatasetSchema schema = parse_schema(line);

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MolecularGraph g = parse_record(line, line_no);
    try {
      validate_graph(g, schema);
    } catch (const ValidationError& e) {
      throw DataError(line_no, std::string("invalid molecule '") + g.id + "': " + e.what());
    }
    fn(schema, std::move(g));
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  Dataset ds;
  bool have_schema = false;
  for_each_molecule(path, [&](const DatasetSchema& schema, MolecularGraph&& g) {
    if (!have_schema) {
      ds.schema = schema;
      have_schema = true;
    }
    ds.graphs.push_back(std::move(g));
  });
  if (!have_schema) {
    // Header-only file: recover the schema for empty datasets.
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    ds.schema = parse_schema(line);
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError(0, "cannot open for writing: " + path.string());
  json header;
  header["atom_vocab_sizes"] = ds.schema.atom_vocab;
  header["bond_vocab_sizes"] = ds.schema.bond_vocab;
  out << header.dump() << "\n";
  for (const auto& g : ds.graphs) {
    json j;
    j["id"] = g.id;
    auto af = json::array();
    for (Eigen::Index i = 0; i < g.atom_features.rows(); ++i) {
      auto row = json::array();
      for (Eigen::Index c = 0; c < g.atom_features.cols(); ++c) row.push_back(g.atom_features(i, c));
      af.push_back(row);
    }
    j["atom_features"] = af;
    auto bonds = json::array();
    for (const auto& [u, v] : g.bonds) bonds.push_back(json::array({u, v}));
    j["bonds"] = bonds;
    auto bf = json::array();
    for (Eigen::Index b = 0; b < g.bond_features.rows(); ++b) {
      auto row = json::array();
      for (Eigen::Index c = 0; c < g.bond_features.cols(); ++c) row.push_back(g.bond_features(b, c));
      bf.push_back(row);
    }
    j["bond_features"] = bf;
    auto coords = json::array();
    for (Eigen::Index i = 0; i < g.coords.rows(); ++i) {
      coords.push_back(json::array({g.coords(i, 0), g.coords(i, 1), g.coords(i, 2)}));
    }
    j["coords"] = coords;
    if (g.target) {
      j["target"] = *g.target;
    } else {
      j["target"] = nullptr;
    }
    out << j.dump() << "\n";
  }
}

}  // namespace molprop
