// Command-line front end: validate, enumerate, compile, search, report.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "archspace/error.hpp"
#include "archspace/graph.hpp"
#include "archspace/hashing.hpp"
#include "archspace/runner.hpp"
#include "archspace/searchers.hpp"
#include "archspace/traversal.hpp"

namespace fs = std::filesystem;
using namespace archspace;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kParse = 2,
  kRootShape = 3,
  kPathMismatch = 4,
  kShape = 5,
  kManifest = 6,
};

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Usage("cannot read " + file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_shape_error(const Error& e) {
  return e.code() == ErrorCode::ShapeIncompatible || e.code() == ErrorCode::ShapeUnderflow;
}

// Parse errors are reported as "<file>:<line>:<col>: ..." and exit 2.
SpaceExpr load_space(const std::string& file, std::string* text_out = nullptr) {
  std::string text = read_text(file);
  SpaceExpr e = parse(text);
  if (text_out) *text_out = std::move(text);
  return e;
}

Shape shape_arg(const std::string& text) {
  try {
    return parse_shape(text);
  } catch (const Error& e) {
    throw Usage("bad --input-shape \"" + text + "\": " + e.what());
  }
}

// --- subcommands -----------------------------------------------------------------

struct ValidateArgs {
  std::string space;
  std::uint64_t cap = 1'000'000;
  std::string input_shape;
};

int cmd_validate(const ValidateArgs& a) {
  const SpaceExpr space = load_space(a.space);
  std::uint64_t n = 0;
  if (a.input_shape.empty()) {
    n = count_models(space, a.cap);
  } else {
    try {
      n = count_leaves(RawTraversal(space, shape_arg(a.input_shape)), a.cap);
    } catch (const Error& e) {
      if (!is_shape_error(e)) throw;
      std::cerr << a.space << ": root does not accept input " << a.input_shape << ": " << e.what() << "\n";
      return kRootShape;
    }
  }
  if (n > a.cap)
    std::cout << "> " << a.cap << " models\n";
  else
    std::cout << n << (n == 1 ? " model\n" : " models\n");
  return kOk;
}

struct EnumerateArgs {
  std::string space;
  std::string input_shape = "32,32,3";
  std::size_t limit = 1'000'000;
  std::string out;
};

int cmd_enumerate(const EnumerateArgs& a) {
  const SpaceExpr space = load_space(a.space);
  if (a.limit < 1) throw Usage("--limit must be >= 1");
  std::unique_ptr<RawTraversal> root;
  try {
    root = std::make_unique<RawTraversal>(space, shape_arg(a.input_shape));
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    std::cerr << a.space << ": root does not accept input " << a.input_shape << ": " << e.what() << "\n";
    return kRootShape;
  }
  const Enumeration en = enumerate(*root, a.limit);
  for (const auto& p : en.pruned) std::cerr << "pruned " << p << "\n";

  if (a.out.empty()) {
    for (const auto& p : en.paths) std::cout << path_to_json(p) << "\n";
  } else {
    fs::create_directories(a.out);
    const int width = std::max<int>(6, static_cast<int>(std::to_string(en.paths.size()).size()));
    for (std::size_t i = 0; i < en.paths.size(); ++i) {
      std::string idx = std::to_string(i);
      idx.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(idx.size(), width), '0');
      write_atomic(fs::path(a.out) / ("path_" + idx + ".json"), path_to_json(en.paths[i]) + "\n");
    }
    std::cout << en.paths.size() << (en.paths.size() == 1 ? " path" : " paths") << " written to " << a.out << "\n";
  }
  if (en.truncated) std::cerr << "truncated at --limit " << a.limit << "\n";
  return kOk;
}

struct CompileArgs {
  std::string space;
  std::string path;
  std::string input_shape = "32,32,3";
};

int cmd_compile(const CompileArgs& a) {
  const SpaceExpr space = load_space(a.space);
  const Shape in = shape_arg(a.input_shape);
  Path path;
  try {
    path = path_from_json(read_text(a.path));
  } catch (const Error& e) {
    std::cerr << a.path << ": " << e.what() << "\n";
    return kPathMismatch;
  }
  try {
    std::cout << to_json(compile(space, in, path)) << "\n";
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PathMismatch) {
      std::cerr << a.path << ": " << e.what() << "\n";
      return kPathMismatch;
    }
    if (is_shape_error(e)) {
      std::cerr << e.what() << "\n";
      return kShape;
    }
    throw;
  }
  return kOk;
}

struct SearchArgs {
  std::string space;
  std::string input_shape = "32,32,3";
  std::string searcher = "random";
  std::size_t budget = 64;
  std::uint64_t seed = 0;
  std::string evaluator;
  std::size_t reps = 1;
  std::string run_dir;
  bool no_timing = false;
  bool parallel_eval = false;
  SearcherConfig knobs;
};

int cmd_search(SearchArgs a) {
  std::string text;
  const SpaceExpr space = load_space(a.space, &text);
  auto kind = searcher_kind_from_string(a.searcher);
  if (!kind) throw Usage("unknown --searcher \"" + a.searcher + "\" (random, mcts, mcts_bisect, smbo)");

  RunManifest m;
  m.space_file = a.space;
  m.space_hash = to_hex(fnv1a64(text));
  m.input_shape = shape_arg(a.input_shape);
  m.config = a.knobs;
  m.config.kind = *kind;
  m.config.seed = a.seed;
  m.config.timing = !a.no_timing;
  m.config.parallel_eval = a.parallel_eval;
  m.evaluator = a.evaluator;
  m.budget = a.budget;
  m.reps = a.reps;
  if (!a.no_timing) m.created_at = utc_timestamp();

  fs::path dir = a.run_dir;
  if (dir.empty()) {
    const char* root = std::getenv("ARCHSPACE_RUN_DIR");
    dir = fs::path(root && *root ? root : "runs") /
          (fs::path(a.space).stem().string() + "-" + std::string(to_string(*kind)) + "-s" + std::to_string(a.seed));
  }

  SearchOutcome out;
  try {
    out = search_to_dir(m, space, dir);
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    std::cerr << a.space << ": root does not accept input " << a.input_shape << ": " << e.what() << "\n";
    return kRootShape;
  } catch (const ManifestError& e) {
    std::cerr << e.what() << "\n";
    return kManifest;
  }
  const LoadedRun run = load_run(dir);
  const auto stats = best_so_far_stats(run.reps);
  std::cout << "run dir " << dir.string() << ": " << out.reps_run << " reps run, " << out.reps_skipped
            << " resumed\n";
  std::cout << "best after " << a.budget << ": " << format_double(stats.back().mean) << " +- "
            << format_double(stats.back().std_error) << "\n";
  return kOk;
}

int cmd_report(const std::vector<std::string>& dirs) {
  std::vector<LoadedRun> runs;
  try {
    for (const auto& d : dirs) runs.push_back(load_run(d));
    std::cout << report_csv(runs);
  } catch (const ManifestError& e) {
    std::cerr << e.what() << "\n";
    return kManifest;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search-space language, graph compiler and architecture searchers"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Parse a space and count its models");
  validate_cmd->add_option("space", va.space, "Space file (.arch)")->required();
  validate_cmd->add_option("--cap", va.cap, "Stop counting beyond this many models")->capture_default_str();
  validate_cmd->add_option("--input-shape", va.input_shape,
                           "Count only shape-valid models for this input (H,W,C or D)");

  EnumerateArgs ea;
  auto* enumerate_cmd = app.add_subcommand("enumerate", "Write one path file per model");
  enumerate_cmd->add_option("space", ea.space, "Space file (.arch)")->required();
  enumerate_cmd->add_option("--input-shape", ea.input_shape, "Input shape, H,W,C or D")->capture_default_str();
  enumerate_cmd->add_option("--limit", ea.limit, "Maximum number of paths")->capture_default_str();
  enumerate_cmd->add_option("--out", ea.out, "Output directory (JSON lines on stdout when omitted)");

  CompileArgs ca;
  auto* compile_cmd = app.add_subcommand("compile", "Compile one path to graph JSON");
  compile_cmd->add_option("space", ca.space, "Space file (.arch)")->required();
  compile_cmd->add_option("path", ca.path, "Path JSON file")->required();
  compile_cmd->add_option("--input-shape", ca.input_shape, "Input shape, H,W,C or D")->capture_default_str();

  SearchArgs sa;
  auto* search_cmd = app.add_subcommand("search", "Run repeated searches into a run directory");
  search_cmd->add_option("space", sa.space, "Space file (.arch)")->required();
  search_cmd->add_option("--input-shape", sa.input_shape, "Input shape, H,W,C or D")->capture_default_str();
  search_cmd->add_option("--searcher", sa.searcher, "random | mcts | mcts_bisect | smbo")->capture_default_str();
  search_cmd->add_option("--budget", sa.budget, "Evaluations per repetition")->capture_default_str();
  search_cmd->add_option("--seed", sa.seed, "Base seed; repetition r uses seed + r")->capture_default_str();
  search_cmd
      ->add_option("--evaluator", sa.evaluator,
                   "linear:<seed>[:sigma] | prefix:<seed> | table:<file> | cmd:<program>[:timeout]")
      ->required();
  search_cmd->add_option("--reps", sa.reps, "Repetitions")->capture_default_str();
  search_cmd->add_option("--run-dir", sa.run_dir, "Run directory (default under $ARCHSPACE_RUN_DIR or ./runs)");
  search_cmd->add_flag("--no-timing", sa.no_timing, "Zero wall-clock fields for byte-identical output");
  search_cmd->add_flag("--parallel-eval", sa.parallel_eval, "Random search: evaluate the budget concurrently");
  search_cmd->add_option("--c", sa.knobs.c, "UCB exploration constant")->capture_default_str();
  search_cmd->add_option("--epsilon", sa.knobs.epsilon, "SMBO exploration probability")->capture_default_str();
  search_cmd->add_option("--pool", sa.knobs.pool, "SMBO candidate rollouts per step")->capture_default_str();
  search_cmd->add_option("--ngram", sa.knobs.ngram_max, "SMBO n-gram order")->capture_default_str();
  search_cmd->add_option("--lambda", sa.knobs.lambda, "SMBO ridge penalty")->capture_default_str();
  search_cmd->add_option("--branch-factor", sa.knobs.branch_factor, "Bisection branching")->capture_default_str();

  std::vector<std::string> report_dirs;
  auto* report_cmd = app.add_subcommand("report", "Best-so-far and threshold tables as CSV");
  report_cmd->add_option("run_dirs", report_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; usage errors share the generic failure code.
    return app.exit(e) == 0 ? kOk : kFailure;
  }

  try {
    if (*validate_cmd) return cmd_validate(va);
    if (*enumerate_cmd) return cmd_enumerate(ea);
    if (*compile_cmd) return cmd_compile(ca);
    if (*search_cmd) return cmd_search(sa);
    if (*report_cmd) return cmd_report(report_dirs);
  } catch (const ParseError& e) {
    std::string file = *validate_cmd ? va.space : *enumerate_cmd ? ea.space : *compile_cmd ? ca.space : sa.space;
    std::cerr << file << ":" << e.span().line << ":" << e.span().column << ": " << to_string(e.code()) << ": "
              << e.detail() << "\n";
    return kParse;
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
