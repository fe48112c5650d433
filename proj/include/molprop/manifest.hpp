#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace molprop {

/// Record of one CLI run, written atomically to the output directory before
/// work starts (status "started") and again when it finishes (status
/// "completed", output hashes filled). The stored argv makes the run
/// replayable.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // everything after the program name
  nlohmann::json config;          // resolved settings snapshot
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> hashes;  // path -> fnv1a64 hex of contents
  std::string status;                         // "started" or "completed"
  std::string started_at;
  std::string finished_at;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

std::string file_hash_hex(const std::string& path);  // fnv1a64 of the bytes
std::string timestamp_utc();                         // ISO 8601, second resolution

}  // namespace molprop
