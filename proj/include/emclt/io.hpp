#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace emclt {

inline constexpr const char* kVersion = "1.0.0";

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string fmt_num(double x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> cells);
  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Writes the table and `<path>.json` with the given metadata.
  void write(const std::filesystem::path& path, const nlohmann::json& meta) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// Reads a CSV written by CsvTable (no quoting). First row is the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// Lists every regular file under `dir` except MANIFEST.json with its SHA-256.
nlohmann::json write_manifest(const std::filesystem::path& dir);

}  // namespace emclt
