#pragma once

// Run directories: manifest, per-repetition logs, summaries and reports.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "archspace/searchers.hpp"
#include "archspace/shape.hpp"

namespace archspace {

inline constexpr const char* kToolVersion = "archspace 0.1.0";

/// Shortest decimal that round-trips, no exponent padding ("0.5", "1", "1e-09").
std::string format_double(double v);

/// Leaf count from the declaration alone, ignoring shape validity; stops
/// once it exceeds `cap` (returns cap + 1 then).
std::uint64_t count_models(const SpaceExpr& space, std::uint64_t cap);

/// Current UTC time as ISO 8601, seconds precision.
std::string utc_timestamp();

struct RunManifest {
  std::string space_file;
  std::string space_hash;  // FNV-1a of the file bytes, hex
  Shape input_shape;
  SearcherConfig config;
  std::string evaluator;
  std::size_t budget = 0;
  std::size_t reps = 0;
  std::optional<std::string> created_at;  // null in --no-timing runs
  std::string tool_version = kToolVersion;
};

std::string manifest_json(const RunManifest& m);
/// Throws Error(MalformedGraph) on schema violations.
RunManifest parse_manifest(std::string_view text);
/// Equal in everything that affects results (not timestamps or file names).
bool same_experiment(const RunManifest& a, const RunManifest& b);

/// One compact JSON line, no trailing newline.
std::string record_json(const EvalRecord& r);
/// Fields the report needs; throws Error(MalformedGraph).
EvalRecord parse_record_json(std::string_view line);
/// "step,score,best" header plus one row per record.
std::string record_csv(const std::vector<EvalRecord>& records);

std::string rep_stem(std::size_t rep);  // "rep_000"

struct StepStat {
  std::size_t step = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::optional<double> surrogate_size;
};
/// Mean and standard error of best-so-far per step across repetitions.
std::vector<StepStat> best_so_far_stats(const std::vector<std::vector<EvalRecord>>& reps);

std::string summary_json(const RunManifest& m, const std::vector<std::vector<EvalRecord>>& reps);

struct SearchOutcome {
  std::size_t reps_run = 0;
  std::size_t reps_skipped = 0;
  std::size_t failed_evaluations = 0;
};

/// Thrown when a run directory holds a manifest for a different experiment
/// or is missing files the report needs.
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs every repetition into `run_dir`, resuming completed ones.
/// Throws ManifestError when `run_dir` holds an incompatible manifest.
SearchOutcome search_to_dir(const RunManifest& manifest, const SpaceExpr& space,
                            const std::filesystem::path& run_dir);

struct LoadedRun {
  std::filesystem::path dir;
  RunManifest manifest;
  std::vector<std::vector<EvalRecord>> reps;
};
LoadedRun load_run(const std::filesystem::path& run_dir);

inline const std::vector<double>& report_thresholds() {
  static const std::vector<double> t{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  return t;
}
/// Share of evaluated models (pooled over repetitions) scoring above `threshold`.
double fraction_above(const std::vector<std::vector<EvalRecord>>& reps, double threshold);

/// Two CSV tables separated by a blank line: mean/stderr best-so-far per step,
/// then fraction above each threshold. Throws ManifestError on incompatible runs.
std::string report_csv(const std::vector<LoadedRun>& runs);

/// Writes `content` to `file` through a temporary sibling and rename.
void write_atomic(const std::filesystem::path& file, const std::string& content);

}  // namespace archspace
