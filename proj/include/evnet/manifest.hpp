#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace evnet {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// ISO-8601 UTC; honours SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

const char* tool_version();

// Run record written next to every set of CLI outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> input_hashes;  // input label -> sha256
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> output_hashes;  // file name -> sha256
  std::string tool_version = evnet::tool_version();
  std::string timestamp = utc_timestamp();

  // sha256 over every field except the timestamp.
  std::string fingerprint() const;
  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace evnet
