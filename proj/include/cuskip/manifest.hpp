#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cuskip {

inline constexpr const char* kToolVersion = "1.0.0";

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

struct ManifestFile {
  std::string path;  // relative to the manifest's directory for outputs, absolute for inputs
  std::string fnv1a64;
  bool volatile_content = false;  // wall-time fields; excluded from rerun comparison

  friend bool operator==(const ManifestFile&, const ManifestFile&) = default;
};

// Written as manifest.json next to the outputs of every command.
struct RunManifest {
  std::string tool = "cuskip";
  std::string version = kToolVersion;
  std::string command;
  std::vector<std::string> argv;
  nlohmann::ordered_json config;  // full option set, enough to rerun the command
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text, const std::string& source = "<manifest>");
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

ManifestFile describe_file(const std::filesystem::path& path, const std::filesystem::path& base, bool volatile_content);

}  // namespace cuskip
