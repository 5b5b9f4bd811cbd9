#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvcal/preranks.hpp"

namespace mvcal {

/// Forecast archive header, stored as a JSON sidecar next to the CSV data.
struct ArchiveHeader {
  Eigen::Index d = 0;
  std::optional<GridShape> grid;  // grids flatten row-major, first index slowest
  int m = 0;
  long n_cases = 0;
  std::string variable = "value";
  std::string units;
};

/// Line-oriented archive: one CSV record per case holding the time index, the
/// observation vector, then each member vector. Written atomically
/// (temp file + rename). Base path "x" produces "x.csv" and "x.json".
class ArchiveWriter {
 public:
  ArchiveWriter(const std::filesystem::path& base, ArchiveHeader header);
  ~ArchiveWriter();
  ArchiveWriter(const ArchiveWriter&) = delete;
  ArchiveWriter& operator=(const ArchiveWriter&) = delete;

  void append(long t, const EnsembleCase& ensemble);
  /// Renames the temp file into place and writes the sidecar.
  void finish();

 private:
  std::filesystem::path base_;
  ArchiveHeader header_;
  std::FILE* file_ = nullptr;
  long written_ = 0;
  long last_t_ = 0;
  bool finished_ = false;
};

class ArchiveReader {
 public:
  explicit ArchiveReader(const std::filesystem::path& base);
  ~ArchiveReader();
  ArchiveReader(const ArchiveReader&) = delete;
  ArchiveReader& operator=(const ArchiveReader&) = delete;

  const ArchiveHeader& header() const { return header_; }
  /// Reads the next record; false at end of data.
  bool next(long& t, EnsembleCase& ensemble);

 private:
  std::filesystem::path base_;
  ArchiveHeader header_;
  std::FILE* file_ = nullptr;
  long record_ = 0;
  long last_t_ = 0;
  std::string line_;
};

/// Loads a whole archive into memory (desk-scale convenience).
std::pair<std::vector<long>, std::vector<EnsembleCase>> read_archive(
    const std::filesystem::path& base);

std::filesystem::path archive_csv_path(const std::filesystem::path& base);
std::filesystem::path archive_json_path(const std::filesystem::path& base);

}  // namespace mvcal
