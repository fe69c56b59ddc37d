#include "cuskip/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cuskip/error.hpp"

namespace cuskip {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

nlohmann::ordered_json file_json(const ManifestFile& f) {
  nlohmann::ordered_json j;
  j["path"] = f.path;
  j["fnv1a64"] = f.fnv1a64;
  if (f.volatile_content) j["volatile"] = true;
  return j;
}

ManifestFile file_from_json(const nlohmann::ordered_json& j) {
  ManifestFile f;
  f.path = j.at("path").get<std::string>();
  f.fnv1a64 = j.at("fnv1a64").get<std::string>();
  f.volatile_content = j.value("volatile", false);
  return f;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = kFnvOffset;
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof buffer);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buffer[i]);
      h *= kFnvPrime;
    }
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

ManifestFile describe_file(const std::filesystem::path& path, const std::filesystem::path& base,
                           bool volatile_content) {
  ManifestFile f;
  f.path = base.empty() ? path.string() : std::filesystem::relative(path, base).generic_string();
  f.fnv1a64 = hex64(fnv1a64_file(path));
  f.volatile_content = volatile_content;
  return f;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = tool;
  j["version"] = version;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& f : inputs) j["inputs"].push_back(file_json(f));
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& f : outputs) j["outputs"].push_back(file_json(f));
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text, const std::string& source) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  try {
    RunManifest m;
    m.tool = j.at("tool").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config");
    for (const auto& f : j.at("inputs")) m.inputs.push_back(file_from_json(f));
    for (const auto& f : j.at("outputs")) m.outputs.push_back(file_from_json(f));
    if (m.tool != "cuskip") throw ConfigError(source + ": not a cuskip manifest");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(source + ": malformed manifest: " + e.what());
  }
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_json();
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_json(text.str(), path.string());
}

}  // namespace cuskip
