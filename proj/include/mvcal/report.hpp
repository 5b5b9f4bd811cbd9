#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mvcal/pipeline.hpp"
#include "mvcal/ranks.hpp"

namespace mvcal {

/// Writes text to `path` atomically (temp file in the same directory + rename).
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

nlohmann::json histogram_to_json(const RankHistogram& histogram);
RankHistogram histogram_from_json(const nlohmann::json& j);

/// "bin,count" rows for ranks 1..M+1 plus a trailing "skipped,<n>" row.
std::string histogram_csv(const RankHistogram& histogram);

/// "t,e,rejected" rows; the rejection flag is sticky from the first crossing.
std::string trace_csv(const EProcess& process, const TestDecision& decision);

nlohmann::json decision_to_json(const TestDecision& decision, const std::string& prerank_id);

/// Full-run JSON bundle: histograms, decisions, e-value traces, and the
/// rank-correlation matrix (NaN entries serialize as null).
nlohmann::json run_report_json(const EvaluationRun& run, const Eigen::MatrixXd& correlations);

/// File-name-safe form of a canonical pre-rank id, e.g. "dependence_h_1".
std::string sanitize_id(const std::string& id);

/// Writes hist_*.csv, trace_*.csv (when present), and report.json under out_dir.
void write_run_outputs(const EvaluationRun& run, const std::filesystem::path& out_dir);

}  // namespace mvcal
