#include "mvcal/archive.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <system_error>

#include <json.hpp>

#include "mvcal/errors.hpp"

namespace mvcal {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path archive_csv_path(const fs::path& base) {
  fs::path p = base;
  p += ".csv";
  return p;
}

fs::path archive_json_path(const fs::path& base) {
  fs::path p = base;
  p += ".json";
  return p;
}

namespace {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

json header_to_json(const ArchiveHeader& header) {
  json j;
  j["layout"] = header.grid ? "grid" : "flat";
  j["d"] = header.d;
  if (header.grid) {
    j["p"] = header.grid->rows;
    j["q"] = header.grid->cols;
  }
  j["m"] = header.m;
  j["n_cases"] = header.n_cases;
  j["variable"] = header.variable;
  j["units"] = header.units;
  return j;
}

ArchiveHeader header_from_json(const json& j, const fs::path& where) {
  ArchiveHeader header;
  try {
    const std::string layout = j.at("layout").get<std::string>();
    header.d = j.at("d").get<Eigen::Index>();
    if (layout == "grid") {
      header.grid = GridShape{j.at("p").get<Eigen::Index>(), j.at("q").get<Eigen::Index>()};
    } else if (layout != "flat") {
      throw DataError(where.string() + ": unknown layout '" + layout + "'");
    }
    header.m = j.at("m").get<int>();
    header.n_cases = j.at("n_cases").get<long>();
    header.variable = j.value("variable", std::string{"value"});
    header.units = j.value("units", std::string{});
  } catch (const json::exception& e) {
    throw DataError(where.string() + ": bad archive header: " + e.what());
  }
  if (header.d < 1 || header.m < 1)
    throw DataError(where.string() + ": archive header needs d >= 1 and m >= 1");
  if (header.grid && header.grid->rows * header.grid->cols != header.d)
    throw DataError(where.string() + ": grid shape does not match d");
  return header;
}

}  // namespace

ArchiveWriter::ArchiveWriter(const fs::path& base, ArchiveHeader header)
    : base_(base), header_(std::move(header)) {
  const fs::path tmp = archive_csv_path(base_).string() + ".tmp";
  file_ = std::fopen(tmp.c_str(), "wb");
  if (!file_) throw DataError("cannot open '" + tmp.string() + "' for writing");
}

ArchiveWriter::~ArchiveWriter() {
  if (!finished_) {
    if (file_) std::fclose(file_);
    std::error_code ec;
    fs::remove(archive_csv_path(base_).string() + ".tmp", ec);
  }
}

void ArchiveWriter::append(long t, const EnsembleCase& ensemble) {
  if (finished_) throw std::logic_error("ArchiveWriter: append after finish");
  ensemble.validate();
  if (ensemble.dim() != header_.d || ensemble.member_count() != header_.m)
    throw DataError("archive record shape does not match header");
  if (written_ > 0 && t <= last_t_)
    throw DataError("archive time indices must be strictly increasing");
  last_t_ = t;
  ++written_;

  std::string line = std::to_string(t);
  const auto push = [&line](double v) {
    line += ',';
    line += format_double(v);
  };
  for (Eigen::Index i = 0; i < header_.d; ++i) push(ensemble.observation(i));
  for (int member = 0; member < header_.m; ++member)
    for (Eigen::Index i = 0; i < header_.d; ++i) push(ensemble.members(i, member));
  line += '\n';
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size())
    throw DataError("archive write failed");
}

void ArchiveWriter::finish() {
  if (finished_) return;
  header_.n_cases = written_;
  if (std::fclose(file_) != 0) throw DataError("archive close failed");
  file_ = nullptr;

  const fs::path csv = archive_csv_path(base_);
  fs::rename(csv.string() + ".tmp", csv);

  const fs::path sidecar = archive_json_path(base_);
  const fs::path tmp = sidecar.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << header_to_json(header_).dump(2) << '\n';
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, sidecar);
  finished_ = true;
}

ArchiveReader::ArchiveReader(const fs::path& base) : base_(base) {
  const fs::path sidecar = archive_json_path(base_);
  std::ifstream in(sidecar);
  if (!in) throw DataError("cannot open archive header '" + sidecar.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(sidecar.string() + ": invalid JSON: " + e.what());
  }
  header_ = header_from_json(j, sidecar);

  const fs::path csv = archive_csv_path(base_);
  file_ = std::fopen(csv.c_str(), "rb");
  if (!file_) throw DataError("cannot open archive data '" + csv.string() + "'");
}

ArchiveReader::~ArchiveReader() {
  if (file_) std::fclose(file_);
}

bool ArchiveReader::next(long& t, EnsembleCase& ensemble) {
  line_.clear();
  for (;;) {
    char buf[4096];
    if (!std::fgets(buf, sizeof(buf), file_)) {
      if (line_.empty()) return false;
      break;  // last line without trailing newline
    }
    line_ += buf;
    if (!line_.empty() && line_.back() == '\n') {
      line_.pop_back();
      break;
    }
  }
  if (line_.empty()) return false;
  ++record_;

  const long n_fields = 1 + header_.d * (header_.m + 1);
  const char* p = line_.data();
  const char* end = p + line_.size();
  long field = 0;

  const auto fail = [&](const std::string& why) -> DataError {
    return DataError(archive_csv_path(base_).string() + ": record " + std::to_string(record_) +
                     ", field " + std::to_string(field + 1) + ": " + why);
  };

  const auto next_token = [&](double& out_value, long& out_int, bool want_int) {
    if (p > end) throw fail("missing field");
    const char* comma = static_cast<const char*>(std::memchr(p, ',', static_cast<std::size_t>(end - p)));
    const char* stop = comma ? comma : end;
    std::from_chars_result res{};
    if (want_int)
      res = std::from_chars(p, stop, out_int);
    else
      res = std::from_chars(p, stop, out_value);
    if (res.ec != std::errc{} || res.ptr != stop)
      throw fail("cannot parse '" + std::string(p, stop) + "'");
    p = comma ? comma + 1 : end + 1;
    ++field;
  };

  double value = 0;
  long ti = 0;
  next_token(value, ti, true);
  t = ti;
  if (record_ > 1 && t <= last_t_)
    throw DataError(archive_csv_path(base_).string() + ": record " + std::to_string(record_) +
                    ": time indices must be strictly increasing");
  last_t_ = t;

  ensemble.grid = header_.grid;
  ensemble.observation.resize(header_.d);
  ensemble.members.resize(header_.d, header_.m);
  for (Eigen::Index i = 0; i < header_.d; ++i) {
    next_token(value, ti, false);
    ensemble.observation(i) = value;
  }
  for (int member = 0; member < header_.m; ++member)
    for (Eigen::Index i = 0; i < header_.d; ++i) {
      next_token(value, ti, false);
      ensemble.members(i, member) = value;
    }
  if (field != n_fields || p <= end)
    throw DataError(archive_csv_path(base_).string() + ": record " + std::to_string(record_) +
                    ": expected " + std::to_string(n_fields) + " fields");
  return true;
}

std::pair<std::vector<long>, std::vector<EnsembleCase>> read_archive(const fs::path& base) {
  ArchiveReader reader(base);
  std::vector<long> times;
  std::vector<EnsembleCase> cases;
  if (reader.header().n_cases > 0) {
    times.reserve(static_cast<std::size_t>(reader.header().n_cases));
    cases.reserve(static_cast<std::size_t>(reader.header().n_cases));
  }
  long t = 0;
  EnsembleCase ensemble;
  while (reader.next(t, ensemble)) {
    times.push_back(t);
    cases.push_back(ensemble);
  }
  if (reader.header().n_cases != 0 &&
      static_cast<long>(cases.size()) != reader.header().n_cases)
    throw DataError(archive_csv_path(base).string() + ": header announces " +
                    std::to_string(reader.header().n_cases) + " cases, found " +
                    std::to_string(cases.size()));
  return {std::move(times), std::move(cases)};
}

}  // namespace mvcal
