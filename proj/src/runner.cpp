#include "archspace/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "archspace/error.hpp"
#include "archspace/hashing.hpp"
#include "json_util.hpp"

namespace fs = std::filesystem;

namespace archspace {

using detail::Json;

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// --- structural leaf count ---------------------------------------------------

namespace {

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b, std::uint64_t limit) {
  if (a == 0 || b == 0) return 0;
  if (a > limit / b) return limit;
  return std::min(a * b, limit);
}

std::uint64_t count_rec(const SpaceExpr& e, std::uint64_t limit) {
  std::uint64_t n = 1;
  for (const auto& list : e.value_lists) n = sat_mul(n, list.size(), limit);
  switch (e.kind) {
    case ModuleKind::Concat:
    case ModuleKind::Residual:
      for (const auto& c : e.children) n = sat_mul(n, count_rec(c, limit), limit);
      return n;
    case ModuleKind::MaybeSwap: {
      const std::uint64_t ab = sat_mul(count_rec(e.children[0], limit), count_rec(e.children[1], limit), limit);
      return sat_mul(2, ab, limit);
    }
    case ModuleKind::Or: {
      std::uint64_t s = 0;
      for (const auto& c : e.children) s = std::min(limit, s + count_rec(c, limit));
      return s;
    }
    case ModuleKind::Optional: return std::min(limit, 1 + count_rec(e.children[0], limit));
    case ModuleKind::Repeat: {
      const std::uint64_t a = count_rec(e.children[0], limit);
      std::uint64_t s = 0;
      for (const auto& k : e.value_lists[0]) {
        std::uint64_t p = 1;
        for (std::int64_t i = 0; i < std::get<std::int64_t>(k) && p < limit; ++i) p = sat_mul(p, a, limit);
        s = std::min(limit, s + p);
      }
      return s;
    }
    case ModuleKind::RepeatTied: return sat_mul(e.value_lists[0].size(), count_rec(e.children[0], limit), limit);
    default: return n;
  }
}

}  // namespace

std::uint64_t count_models(const SpaceExpr& space, std::uint64_t cap) {
  return count_rec(space, cap == UINT64_MAX ? cap : cap + 1);
}

// --- manifest ------------------------------------------------------------------

namespace {

Json config_json(const SearcherConfig& c) {
  return Json{{"kind", std::string(to_string(c.kind))},
              {"c", c.c},
              {"branch_factor", c.branch_factor},
              {"epsilon", c.epsilon},
              {"pool", c.pool},
              {"ngram_max", c.ngram_max},
              {"lambda", c.lambda},
              {"seed", c.seed},
              {"parallel_eval", c.parallel_eval},
              {"timing", c.timing}};
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedGraph, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) malformed(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const Json::exception& e) {
    malformed(std::string("field \"") + key + "\": " + e.what());
  }
}

SearcherConfig json_config(const Json& j) {
  SearcherConfig c;
  auto kind = searcher_kind_from_string(get<std::string>(j, "kind"));
  if (!kind) malformed("unknown searcher kind");
  c.kind = *kind;
  c.c = get<double>(j, "c");
  c.branch_factor = get<std::size_t>(j, "branch_factor");
  c.epsilon = get<double>(j, "epsilon");
  c.pool = get<std::size_t>(j, "pool");
  c.ngram_max = get<int>(j, "ngram_max");
  c.lambda = get<double>(j, "lambda");
  c.seed = get<std::uint64_t>(j, "seed");
  c.parallel_eval = get<bool>(j, "parallel_eval");
  c.timing = get<bool>(j, "timing");
  return c;
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const RunManifest& m) {
  Json j{{"space_file", m.space_file},
         {"space_hash", m.space_hash},
         {"input_shape", detail::shape_json(m.input_shape)},
         {"searcher", config_json(m.config)},
         {"evaluator", m.evaluator},
         {"budget", m.budget},
         {"reps", m.reps},
         {"created_at", m.created_at ? Json(*m.created_at) : Json(nullptr)},
         {"tool_version", m.tool_version}};
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    malformed(std::string("manifest: ") + e.what());
  }
  RunManifest m;
  m.space_file = get<std::string>(j, "space_file");
  m.space_hash = get<std::string>(j, "space_hash");
  m.input_shape = detail::json_shape(field(j, "input_shape"));
  m.config = json_config(field(j, "searcher"));
  m.evaluator = get<std::string>(j, "evaluator");
  m.budget = get<std::size_t>(j, "budget");
  m.reps = get<std::size_t>(j, "reps");
  const Json& created = field(j, "created_at");
  if (!created.is_null()) m.created_at = get<std::string>(j, "created_at");
  m.tool_version = get<std::string>(j, "tool_version");
  return m;
}

bool same_experiment(const RunManifest& a, const RunManifest& b) {
  Json ca = config_json(a.config), cb = config_json(b.config);
  // Timing and batch mode do not change scores.
  for (Json* c : {&ca, &cb}) {
    c->erase("timing");
    c->erase("parallel_eval");
  }
  return a.space_hash == b.space_hash && a.input_shape == b.input_shape && ca == cb && a.evaluator == b.evaluator &&
         a.budget == b.budget && a.reps == b.reps;
}

// --- records -------------------------------------------------------------------

std::string record_json(const EvalRecord& r) {
  Json j{{"step", r.step},
         {"path", detail::path_json(r.path)},
         {"signature", to_hex(r.signature)},
         {"score", r.score},
         {"best_so_far", r.best_so_far},
         {"failed", r.failed},
         {"wall_ms", r.wall_ms}};
  if (r.failed) j["error"] = r.error;
  if (r.surrogate_size) j["surrogate_size"] = *r.surrogate_size;
  return j.dump();
}

EvalRecord parse_record_json(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    malformed(std::string("record: ") + e.what());
  }
  EvalRecord r;
  r.step = get<std::size_t>(j, "step");
  r.path = detail::json_path(field(j, "path"));
  auto sig = from_hex(get<std::string>(j, "signature"));
  if (!sig) malformed("record signature is not hex");
  r.signature = *sig;
  r.score = get<double>(j, "score");
  r.best_so_far = get<double>(j, "best_so_far");
  r.failed = get<bool>(j, "failed");
  r.wall_ms = get<double>(j, "wall_ms");
  if (j.contains("error")) r.error = get<std::string>(j, "error");
  if (j.contains("surrogate_size")) r.surrogate_size = get<std::size_t>(j, "surrogate_size");
  return r;
}

std::string record_csv(const std::vector<EvalRecord>& records) {
  std::string out = "step,score,best\n";
  for (const auto& r : records)
    out += std::to_string(r.step) + "," + format_double(r.score) + "," + format_double(r.best_so_far) + "\n";
  return out;
}

std::string rep_stem(std::size_t rep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu", rep);
  return buf;
}

// --- aggregation ---------------------------------------------------------------

std::vector<StepStat> best_so_far_stats(const std::vector<std::vector<EvalRecord>>& reps) {
  std::vector<StepStat> out;
  if (reps.empty()) return out;
  std::size_t steps = reps.front().size();
  for (const auto& r : reps) steps = std::min(steps, r.size());
  const double k = static_cast<double>(reps.size());
  for (std::size_t s = 0; s < steps; ++s) {
    StepStat st;
    st.step = s + 1;
    double sum = 0.0;
    for (const auto& r : reps) sum += r[s].best_so_far;
    st.mean = sum / k;
    if (reps.size() > 1) {
      double ss = 0.0;
      for (const auto& r : reps) ss += (r[s].best_so_far - st.mean) * (r[s].best_so_far - st.mean);
      st.std_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    }
    if (reps.front()[s].surrogate_size) {
      double sz = 0.0;
      for (const auto& r : reps) sz += static_cast<double>(r[s].surrogate_size.value_or(0));
      st.surrogate_size = sz / k;
    }
    out.push_back(st);
  }
  return out;
}

std::string summary_json(const RunManifest& m, const std::vector<std::vector<EvalRecord>>& reps) {
  Json steps = Json::array();
  for (const auto& st : best_so_far_stats(reps)) {
    Json row{{"step", st.step}, {"mean_best", st.mean}, {"stderr_best", st.std_error}};
    if (st.surrogate_size) row["surrogate_size"] = *st.surrogate_size;
    steps.push_back(std::move(row));
  }
  Json failed = Json::array();
  Json final_best = Json::array();
  for (const auto& r : reps) {
    failed.push_back(std::count_if(r.begin(), r.end(), [](const EvalRecord& e) { return e.failed; }));
    final_best.push_back(r.empty() ? 0.0 : r.back().best_so_far);
  }
  Json j{{"searcher", std::string(to_string(m.config.kind))},
         {"evaluator", m.evaluator},
         {"budget", m.budget},
         {"reps", m.reps},
         {"steps", std::move(steps)},
         {"final_best", std::move(final_best)},
         {"failed_evaluations", std::move(failed)}};
  return j.dump(2) + "\n";
}

// --- files -----------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ManifestError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<EvalRecord> read_log(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ManifestError("missing log " + p.string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_record_json(line));
  }
  return out;
}

bool rep_complete(const fs::path& dir, std::size_t rep, std::size_t budget) {
  const fs::path log = dir / (rep_stem(rep) + ".jsonl");
  if (!fs::exists(log) || !fs::exists(dir / (rep_stem(rep) + ".csv"))) return false;
  try {
    return read_log(log).size() == budget;
  } catch (const std::exception&) {
    return false;
  }
}

std::unique_ptr<Evaluator> evaluator_for(const std::string& spec) {
  auto e = make_evaluator(spec);
  return e->cacheable() ? cached(std::move(e)) : std::move(e);
}

}  // namespace

void write_atomic(const fs::path& file, const std::string& content) {
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const fs::path tmp = file.string() + ".tmp." + tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidValue, "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::InvalidValue, "cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

SearchOutcome search_to_dir(const RunManifest& manifest, const SpaceExpr& space, const fs::path& run_dir) {
  validate(manifest.config);
  if (manifest.budget < 1) throw Error(ErrorCode::InvalidValue, "budget must be >= 1");
  if (manifest.reps < 1) throw Error(ErrorCode::InvalidValue, "reps must be >= 1");
  // Fail on a bad root shape or evaluator before touching the directory.
  (void)RawTraversal(space, manifest.input_shape);
  (void)make_evaluator(manifest.evaluator);

  fs::create_directories(run_dir / "models");
  const fs::path manifest_file = run_dir / "manifest.json";
  if (fs::exists(manifest_file)) {
    RunManifest old;
    try {
      old = parse_manifest(read_file(manifest_file));
    } catch (const Error& e) {
      throw ManifestError(manifest_file.string() + ": " + e.what());
    }
    if (!same_experiment(old, manifest))
      throw ManifestError(run_dir.string() + " holds a different experiment; use another --run-dir");
  } else {
    write_atomic(manifest_file, manifest_json(manifest));
  }

  std::vector<std::size_t> pending;
  SearchOutcome outcome;
  for (std::size_t rep = 0; rep < manifest.reps; ++rep) {
    if (rep_complete(run_dir, rep, manifest.budget))
      ++outcome.reps_skipped;
    else
      pending.push_back(rep);
  }

  std::exception_ptr failure;
  std::size_t failed_evals = 0;
  const auto n = static_cast<std::ptrdiff_t>(pending.size());
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : failed_evals)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::size_t rep = pending[static_cast<std::size_t>(i)];
    try {
      SearcherConfig config = manifest.config;
      config.seed = manifest.config.seed + rep;
      auto evaluator = evaluator_for(manifest.evaluator);
      const auto records = run_search(config, space, manifest.input_shape, *evaluator, manifest.budget);
      std::string log;
      for (const auto& r : records) {
        log += record_json(r) + "\n";
        if (r.failed) ++failed_evals;
        if (!r.graph) continue;
        const fs::path model = run_dir / "models" / (to_hex(r.signature) + ".json");
        if (!fs::exists(model)) write_atomic(model, to_json(*r.graph) + "\n");
      }
      write_atomic(run_dir / (rep_stem(rep) + ".jsonl"), log);
      write_atomic(run_dir / (rep_stem(rep) + ".csv"), record_csv(records));
    } catch (...) {
#pragma omp critical(archspace_rep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  outcome.reps_run = pending.size();
  outcome.failed_evaluations = failed_evals;

  std::vector<std::vector<EvalRecord>> reps;
  for (std::size_t rep = 0; rep < manifest.reps; ++rep) reps.push_back(read_log(run_dir / (rep_stem(rep) + ".jsonl")));
  write_atomic(run_dir / "summary.json", summary_json(manifest, reps));
  return outcome;
}

LoadedRun load_run(const fs::path& run_dir) {
  LoadedRun run;
  run.dir = run_dir;
  const fs::path manifest_file = run_dir / "manifest.json";
  if (!fs::exists(manifest_file)) throw ManifestError("no manifest.json in " + run_dir.string());
  try {
    run.manifest = parse_manifest(read_file(manifest_file));
    for (std::size_t rep = 0; rep < run.manifest.reps; ++rep) {
      auto records = read_log(run_dir / (rep_stem(rep) + ".jsonl"));
      if (records.size() != run.manifest.budget)
        throw ManifestError(rep_stem(rep) + ".jsonl in " + run_dir.string() + " is incomplete");
      run.reps.push_back(std::move(records));
    }
  } catch (const Error& e) {
    throw ManifestError(run_dir.string() + ": " + e.what());
  }
  return run;
}

double fraction_above(const std::vector<std::vector<EvalRecord>>& reps, double threshold) {
  std::size_t total = 0, above = 0;
  for (const auto& r : reps)
    for (const auto& e : r) {
      ++total;
      if (e.score > threshold) ++above;
    }
  return total ? static_cast<double>(above) / static_cast<double>(total) : 0.0;
}

std::string report_csv(const std::vector<LoadedRun>& runs) {
  if (runs.empty()) throw ManifestError("no run directories given");
  const RunManifest& first = runs.front().manifest;
  for (const auto& r : runs) {
    const RunManifest& m = r.manifest;
    if (m.space_hash != first.space_hash || m.input_shape != first.input_shape || m.evaluator != first.evaluator ||
        m.budget != first.budget)
      throw ManifestError(r.dir.string() + " is not comparable with " + runs.front().dir.string() +
                          " (space, input shape, evaluator and budget must match)");
  }

  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& r : runs) {
    std::string label(to_string(r.manifest.config.kind));
    const int k = ++seen[label];
    if (k > 1) label += "#" + std::to_string(k);
    labels.push_back(std::move(label));
  }

  std::string out = "step";
  for (const auto& l : labels) out += "," + l + "_mean," + l + "_stderr";
  out += "\n";
  std::vector<std::vector<StepStat>> stats;
  for (const auto& r : runs) stats.push_back(best_so_far_stats(r.reps));
  for (std::size_t s = 0; s < first.budget; ++s) {
    out += std::to_string(s + 1);
    for (const auto& st : stats) out += "," + format_double(st[s].mean) + "," + format_double(st[s].std_error);
    out += "\n";
  }

  out += "\nthreshold";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (double t : report_thresholds()) {
    out += format_double(t);
    for (const auto& r : runs) out += "," + format_double(fraction_above(r.reps, t));
    out += "\n";
  }
  return out;
}

}  // namespace archspace
