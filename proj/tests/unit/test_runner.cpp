#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "archspace/error.hpp"
#include "archspace/runner.hpp"
#include "support.hpp"

using namespace archspace;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("archspace_runner_" + name);
  fs::remove_all(d);
  return d;
}

RunManifest small_manifest(SearcherKind kind, std::size_t budget, std::size_t reps) {
  RunManifest m;
  m.space_file = "small.arch";
  m.space_hash = "0123456789abcdef";
  m.input_shape = testsupport::image_shape();
  m.config.kind = kind;
  m.config.seed = 5;
  m.config.pool = 32;
  m.config.timing = false;
  m.evaluator = "prefix:3";
  m.budget = budget;
  m.reps = reps;
  return m;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.0), "0");
}

TEST(CountModels, SmallSpace) { EXPECT_EQ(count_models(testsupport::small_space(), 1'000'000), 24u); }

TEST(CountModels, AgreesWithBruteForce) {
  Rng gen(101);
  testsupport::GenOptions opt;
  for (int i = 0; i < 1000; ++i) {
    const SpaceExpr s = testsupport::random_space(gen, opt);
    const std::uint64_t oracle = testsupport::brute_force_leaf_count(s, 50'000);
    if (oracle > 50'000) continue;
    ASSERT_EQ(count_models(s, 1'000'000), oracle) << pretty_print(s);
  }
}

TEST(CountModels, Saturates) {
  const SpaceExpr s = parse("(Repeat (Affine [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]) [1, 2, 3, 4, 5, 6, 7, 8, 9, 10])");
  EXPECT_EQ(count_models(s, 1000), 1001u);
}

TEST(Manifest, RoundTrip) {
  RunManifest m = small_manifest(SearcherKind::Smbo, 12, 3);
  m.config.c = 0.025;
  m.config.lambda = 0.5;
  m.created_at = "2026-01-01T00:00:00Z";
  const RunManifest back = parse_manifest(manifest_json(m));
  EXPECT_EQ(manifest_json(back), manifest_json(m));
  EXPECT_TRUE(same_experiment(m, back));
  RunManifest other = m;
  other.config.seed = 6;
  EXPECT_FALSE(same_experiment(m, other));
  other = m;
  other.created_at.reset();
  other.config.timing = true;
  EXPECT_TRUE(same_experiment(m, other));
  EXPECT_THROW((void)parse_manifest("{}"), Error);
}

TEST(Records, JsonRoundTrip) {
  PrefixTreeEvaluator ev(3);
  SearcherConfig c;
  c.kind = SearcherKind::Smbo;
  c.pool = 16;
  c.timing = false;
  for (const auto& r : run_search(c, testsupport::small_space(), testsupport::image_shape(), ev, 20)) {
    const EvalRecord back = parse_record_json(record_json(r));
    EXPECT_EQ(back.step, r.step);
    EXPECT_EQ(back.path, r.path);
    EXPECT_EQ(back.signature, r.signature);
    EXPECT_EQ(back.score, r.score);
    EXPECT_EQ(back.best_so_far, r.best_so_far);
    EXPECT_EQ(back.surrogate_size, r.surrogate_size);
    EXPECT_EQ(record_json(back), record_json(r));
  }
}

TEST(Records, CsvBestIsRunningMax) {
  PrefixTreeEvaluator ev(8);
  SearcherConfig c;
  const auto records = run_search(c, testsupport::small_space(), testsupport::image_shape(), ev, 40);
  const auto rows = lines(record_csv(records));
  ASSERT_EQ(rows.front(), "step,score,best");
  ASSERT_EQ(rows.size(), 41u);
  double best = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string step, score, b;
    std::getline(in, step, ',');
    std::getline(in, score, ',');
    std::getline(in, b, ',');
    EXPECT_EQ(std::stoul(step), i);
    best = i == 1 ? std::stod(score) : std::max(best, std::stod(score));
    EXPECT_EQ(std::stod(b), best);
  }
}

TEST(Stats, MeanAndStandardError) {
  std::vector<std::vector<EvalRecord>> reps(3, std::vector<EvalRecord>(1));
  reps[0][0].best_so_far = 0.2;
  reps[1][0].best_so_far = 0.4;
  reps[2][0].best_so_far = 0.9;
  const auto st = best_so_far_stats(reps);
  ASSERT_EQ(st.size(), 1u);
  EXPECT_NEAR(st[0].mean, 0.5, 1e-15);
  // Sample variance (0.09 + 0.01 + 0.16) / 2 = 0.13.
  EXPECT_NEAR(st[0].std_error, std::sqrt(0.13 / 3.0), 1e-15);
}

TEST(RunDir, ByteIdenticalReruns) {
  const SpaceExpr s = testsupport::small_space();
  for (auto kind : {SearcherKind::Random, SearcherKind::MctsBisect, SearcherKind::Smbo}) {
    const auto a = fresh_dir("same_a"), b = fresh_dir("same_b");
    const RunManifest m = small_manifest(kind, 16, 3);
    (void)search_to_dir(m, s, a);
    (void)search_to_dir(m, s, b);
    const auto sa = snapshot(a), sb = snapshot(b);
    EXPECT_EQ(sa, sb);
    EXPECT_TRUE(sa.count("manifest.json"));
    EXPECT_TRUE(sa.count("summary.json"));
    EXPECT_TRUE(sa.count("rep_002.jsonl"));
    EXPECT_TRUE(sa.count("rep_002.csv"));
  }
}

TEST(RunDir, ResumesCompletedReps) {
  const SpaceExpr s = testsupport::small_space();
  const auto d = fresh_dir("resume");
  const RunManifest m = small_manifest(SearcherKind::Random, 10, 3);
  auto first = search_to_dir(m, s, d);
  EXPECT_EQ(first.reps_run, 3u);
  const auto before = snapshot(d);
  fs::remove(d / "rep_001.jsonl");
  auto second = search_to_dir(m, s, d);
  EXPECT_EQ(second.reps_run, 1u);
  EXPECT_EQ(second.reps_skipped, 2u);
  EXPECT_EQ(snapshot(d), before);
  // A truncated log is rerun too.
  std::ofstream(d / "rep_000.jsonl", std::ios::trunc) << "";
  EXPECT_EQ(search_to_dir(m, s, d).reps_run, 1u);
  EXPECT_EQ(snapshot(d), before);
}

TEST(RunDir, RejectsDifferentExperiment) {
  const SpaceExpr s = testsupport::small_space();
  const auto d = fresh_dir("clash");
  (void)search_to_dir(small_manifest(SearcherKind::Random, 5, 1), s, d);
  EXPECT_THROW((void)search_to_dir(small_manifest(SearcherKind::Random, 6, 1), s, d), ManifestError);
  EXPECT_THROW((void)search_to_dir(small_manifest(SearcherKind::Smbo, 5, 1), s, d), ManifestError);
}

TEST(RunDir, BadShapeTouchesNothing) {
  const auto d = fresh_dir("badshape");
  RunManifest m = small_manifest(SearcherKind::Random, 5, 1);
  m.input_shape = Shape({10});
  EXPECT_THROW((void)search_to_dir(m, testsupport::small_space(), d), Error);
  EXPECT_FALSE(fs::exists(d));
}

TEST(RunDir, SmboSummaryTracksTrainingSet) {
  const auto d = fresh_dir("smbo_summary");
  (void)search_to_dir(small_manifest(SearcherKind::Smbo, 8, 2), testsupport::small_space(), d);
  std::ifstream in(d / "summary.json");
  std::ostringstream ss;
  ss << in.rdbuf();
  for (int step = 1; step <= 8; ++step)
    EXPECT_NE(ss.str().find("\"surrogate_size\": " + std::to_string(step) + ".0"), std::string::npos) << step;
}

TEST(Report, ThresholdFractionsAreMonotone) {
  const SpaceExpr s = testsupport::small_space();
  const auto a = fresh_dir("report_a"), b = fresh_dir("report_b");
  (void)search_to_dir(small_manifest(SearcherKind::Random, 12, 2), s, a);
  (void)search_to_dir(small_manifest(SearcherKind::Mcts, 12, 2), s, b);
  const std::vector<LoadedRun> runs{load_run(a), load_run(b)};
  for (const auto& r : runs) {
    double prev = 1.0;
    for (double t : report_thresholds()) {
      const double f = fraction_above(r.reps, t);
      EXPECT_LE(f, prev);
      prev = f;
    }
  }
  const auto rows = lines(report_csv(runs));
  EXPECT_EQ(rows[0], "step,random_mean,random_stderr,mcts_mean,mcts_stderr");
  EXPECT_EQ(rows[13], "");
  EXPECT_EQ(rows[14], "threshold,random,mcts");
  EXPECT_EQ(rows.size(), 15u + report_thresholds().size());
}

TEST(Report, DuplicateKindsGetSuffix) {
  const SpaceExpr s = testsupport::small_space();
  const auto a = fresh_dir("dup_a"), b = fresh_dir("dup_b");
  (void)search_to_dir(small_manifest(SearcherKind::Random, 3, 1), s, a);
  RunManifest m = small_manifest(SearcherKind::Random, 3, 1);
  m.config.seed = 99;
  (void)search_to_dir(m, s, b);
  EXPECT_EQ(lines(report_csv({load_run(a), load_run(b)}))[0],
            "step,random_mean,random_stderr,random#2_mean,random#2_stderr");
}

TEST(Report, BudgetOneIndicators) {
  const auto d = fresh_dir("budget1");
  (void)search_to_dir(small_manifest(SearcherKind::Random, 1, 1), testsupport::small_space(), d);
  const LoadedRun r = load_run(d);
  const double score = r.reps[0][0].score;
  for (double t : report_thresholds()) EXPECT_EQ(fraction_above(r.reps, t), score > t ? 1.0 : 0.0);
}

TEST(Report, RejectsMismatchedOrMissing) {
  const SpaceExpr s = testsupport::small_space();
  const auto a = fresh_dir("mm_a"), b = fresh_dir("mm_b");
  (void)search_to_dir(small_manifest(SearcherKind::Random, 3, 1), s, a);
  (void)search_to_dir(small_manifest(SearcherKind::Random, 4, 1), s, b);
  EXPECT_THROW((void)report_csv({load_run(a), load_run(b)}), ManifestError);
  EXPECT_THROW((void)load_run(fresh_dir("nothing")), ManifestError);
  fs::remove(b / "rep_000.jsonl");
  EXPECT_THROW((void)load_run(b), ManifestError);
}
