#include "mvcal/report.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "mvcal/errors.hpp"

namespace mvcal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

json histogram_to_json(const RankHistogram& histogram) {
  json j;
  j["prerank"] = histogram.prerank_id;
  j["m_plus_1"] = histogram.num_bins();
  j["counts"] = histogram.bin_counts;
  j["skipped"] = histogram.skipped;
  j["total"] = histogram.total;
  j["seed"] = histogram.seed;
  return j;
}

RankHistogram histogram_from_json(const json& j) {
  RankHistogram histogram(j.at("m_plus_1").get<int>(), j.at("prerank").get<std::string>(),
                          j.at("seed").get<std::uint64_t>());
  histogram.bin_counts = j.at("counts").get<std::vector<std::int64_t>>();
  if (static_cast<int>(histogram.bin_counts.size()) != histogram.num_bins())
    throw DataError("histogram JSON: counts length does not match m_plus_1");
  histogram.skipped = j.at("skipped").get<std::int64_t>();
  histogram.total = j.at("total").get<std::int64_t>();
  std::int64_t sum = histogram.skipped;
  for (const auto c : histogram.bin_counts) sum += c;
  if (sum != histogram.total) throw DataError("histogram JSON: counts do not sum to total");
  return histogram;
}

std::string histogram_csv(const RankHistogram& histogram) {
  std::string out = "bin,count\n";
  for (int r = 1; r <= histogram.num_bins(); ++r) {
    out += std::to_string(r);
    out += ',';
    out += std::to_string(histogram.bin_counts[static_cast<std::size_t>(r - 1)]);
    out += '\n';
  }
  out += "skipped," + std::to_string(histogram.skipped) + "\n";
  return out;
}

std::string trace_csv(const EProcess& process, const TestDecision& decision) {
  std::string out = "t,e,rejected\n";
  const auto& trace = process.trace();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const bool rejected =
        decision.rejected && static_cast<long>(i + 1) >= *decision.rejected_at;
    out += std::to_string(i + 1);
    out += ',';
    out += format_double(trace[i]);
    out += rejected ? ",1\n" : ",0\n";
  }
  return out;
}

json decision_to_json(const TestDecision& decision, const std::string& prerank_id) {
  json j;
  j["prerank"] = prerank_id;
  j["alpha"] = decision.alpha;
  j["ell"] = decision.ell;
  j["threshold"] = decision.threshold;
  j["rejected"] = decision.rejected;
  if (decision.rejected_at)
    j["rejected_at"] = *decision.rejected_at;
  else
    j["rejected_at"] = nullptr;
  return j;
}

json run_report_json(const EvaluationRun& run, const Eigen::MatrixXd& correlations) {
  json j;
  j["m"] = run.m;
  j["n_cases"] = run.n_cases;
  j["lag_k"] = run.lag_k;
  j["alpha"] = run.alpha;
  j["seed"] = run.seed;
  j["ell"] = run.specs.size();

  json specs = json::array();
  for (const auto& spec : run.specs) specs.push_back(spec.canonical());
  j["specs"] = specs;

  json histograms = json::array();
  for (const auto& histogram : run.histograms) histograms.push_back(histogram_to_json(histogram));
  j["histograms"] = histograms;

  if (!run.processes.empty()) {
    json decisions = json::array();
    json traces = json::array();
    for (std::size_t s = 0; s < run.processes.size(); ++s) {
      decisions.push_back(decision_to_json(run.decisions[s], run.specs[s].canonical()));
      json trace = json::array();
      for (const double e : run.processes[s].trace()) trace.push_back(e);
      traces.push_back(std::move(trace));
    }
    j["decisions"] = decisions;
    j["traces"] = traces;
  }

  if (correlations.size() > 0) {
    json matrix = json::array();
    for (Eigen::Index r = 0; r < correlations.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < correlations.cols(); ++c) {
        const double v = correlations(r, c);
        if (std::isnan(v))
          row.push_back(nullptr);
        else
          row.push_back(v);
      }
      matrix.push_back(std::move(row));
    }
    j["rank_correlations"] = matrix;
  }
  return j;
}

std::string sanitize_id(const std::string& id) {
  std::string out;
  bool last_was_sep = false;
  for (const char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      last_was_sep = false;
    } else if (!last_was_sep && !out.empty()) {
      out += '_';
      last_was_sep = true;
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

void write_run_outputs(const EvaluationRun& run, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t s = 0; s < run.specs.size(); ++s) {
    const std::string id = sanitize_id(run.specs[s].canonical());
    atomic_write_text(out_dir / ("hist_" + id + ".csv"), histogram_csv(run.histograms[s]));
    if (!run.processes.empty())
      atomic_write_text(out_dir / ("trace_" + id + ".csv"),
                        trace_csv(run.processes[s], run.decisions[s]));
  }
  const Eigen::MatrixXd correlations = rank_correlations(run);
  atomic_write_text(out_dir / "report.json", run_report_json(run, correlations).dump(2) + "\n");
}

}  // namespace mvcal
