#pragma once

// Run directories and manifests for the command-line tool. Needs OpenSSL (libcrypto).

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "respwave/errors.hpp"
#include "respwave/eval/report_io.hpp"

namespace respwave::app {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.1.0";

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned j = 0; j < len; ++j) {
    out += hex[md[j] >> 4];
    out += hex[md[j] & 15];
  }
  return out;
}

inline std::string utc_timestamp(const char* format = "%Y%m%dT%H%M%SZ") {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

/// Creates a fresh directory under `root`. Without a name the directory is
/// `<command>-<UTC timestamp>`; an existing directory is never reused.
inline fs::path make_run_dir(const fs::path& root, std::string_view command, const std::string& name = {}) {
  fs::path dir = root / (name.empty() ? std::string(command) + "-" + utc_timestamp() : name);
  if (name.empty())
    for (int n = 2; fs::exists(dir); ++n) dir = root / (std::string(command) + "-" + utc_timestamp() + "-" + std::to_string(n));
  if (fs::exists(dir)) throw ParameterError("run directory " + dir.string() + " already exists");
  fs::create_directories(dir);
  return dir;
}

/// Config + seed + SHA-256 of every artifact written by a run.
class Manifest {
 public:
  Manifest(std::string_view command, Json config, bool with_time = true) {
    j_["tool"] = "respwave";
    j_["version"] = kVersion;
    j_["command"] = command;
    if (with_time) j_["created_utc"] = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
    j_["config"] = std::move(config);
    j_["inputs"] = Json::object();
    j_["artifacts"] = Json::object();
  }

  void add_input(const fs::path& path) { j_["inputs"][path.string()] = sha256_file(path); }
  void add_artifact(const fs::path& dir, const fs::path& relative) {
    j_["artifacts"][relative.generic_string()] = sha256_file(dir / relative);
  }
  Json& json() { return j_; }

  void write(const fs::path& dir, const std::string& name = "manifest.json") const {
    eval::write_text(dir / name, j_.dump(2) + "\n");
  }

 private:
  Json j_;
};

}  // namespace respwave::app
