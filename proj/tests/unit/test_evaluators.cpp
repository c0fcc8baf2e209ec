#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "archspace/error.hpp"
#include "archspace/evaluators.hpp"
#include "archspace/surrogate.hpp"
#include "archspace/hashing.hpp"
#include "archspace/traversal.hpp"
#include "support.hpp"

using namespace archspace;

namespace {

GraphIR reference_graph() { return compile(testsupport::small_space(), testsupport::image_shape(), testsupport::reference_path()); }

std::vector<GraphIR> small_leaves() {
  std::vector<GraphIR> out;
  const SpaceExpr s = testsupport::small_space();
  for (const Path& p : enumerate(s, testsupport::image_shape(), 100).paths)
    out.push_back(compile(s, testsupport::image_shape(), p));
  return out;
}

EvalFailure failure_of(const GraphIR& g, const std::string& cmd, double timeout) {
  try {
    (void)external_evaluate(g, cmd, timeout);
  } catch (const EvaluationFailed& e) {
    return e.reason();
  }
  ADD_FAILURE() << "no failure for " << cmd;
  return EvalFailure::Spawn;
}

}  // namespace

// --- linear n-gram benchmark ----------------------------------------------------

TEST(LinearBenchmark, EmptyModelScoresHalf) {
  const GraphIR g = compile(parse("(Empty)"), Shape({5}), Path{});
  EXPECT_EQ(linear_ngram_score(g, 42, 0.0), 0.5);
}

TEST(LinearBenchmark, DeterministicWithNoise) {
  const GraphIR g = reference_graph();
  EXPECT_EQ(linear_ngram_score(g, 7, 0.1), linear_ngram_score(g, 7, 0.1));
  EXPECT_NE(linear_ngram_score(g, 7, 0.1), linear_ngram_score(g, 7, 0.0));
}

TEST(LinearBenchmark, MatchesSigmoidOfWeightedFeatures) {
  for (const GraphIR& g : small_leaves()) {
    double z = 0.0;
    for (const auto& [key, count] : featurize(g, 3)) z += linear_ngram_weight(key, 42) * static_cast<double>(count);
    EXPECT_NEAR(linear_ngram_score(g, 42, 0.0), 1.0 / (1.0 + std::exp(-z)), 1e-15);
  }
}

TEST(LinearBenchmark, WeightsInRangeAndSeeded) {
  for (const char* k : {"(Conv2D)", "(ReLU)", "(Conv2D,BatchNorm,ReLU)"}) {
    const double w = linear_ngram_weight(k, 1);
    EXPECT_GE(w, -1.0);
    EXPECT_LE(w, 1.0);
    EXPECT_NE(w, linear_ngram_weight(k, 2));
  }
}

TEST(LinearBenchmark, GoldenValues) {
  // Frozen from the first run; guards against silent changes to the hashing.
  const GraphIR g = reference_graph();
  EXPECT_EQ(linear_ngram_score(g, 42, 0.0), 0x1.c6d01c2dc2cabp-1);   // 0.88830650385479737
  EXPECT_EQ(linear_ngram_score(g, 42, 0.03), 0x1.dc6378dbcbd7ep-1);  // 0.93044641192493294
}

// --- prefix-tree benchmark ------------------------------------------------------

TEST(PrefixBenchmark, EmptyPathScoresHalf) { EXPECT_EQ(prefix_tree_score(Path{}, 3), 0.5); }

TEST(PrefixBenchmark, BonusRange) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double b = prefix_tree_bonus("/0.Conv2D.filters", Literal{static_cast<std::int64_t>(i)}, rng());
    ASSERT_GE(b, -0.05);
    ASSERT_LE(b, 0.05);
  }
}

TEST(PrefixBenchmark, AdditiveOverSteps) {
  for (const GraphIR& g : small_leaves()) {
    double sum = 0.5;
    for (const PathStep& s : g.source_path.steps) sum += prefix_tree_bonus(s.site, s.value, 11);
    EXPECT_NEAR(prefix_tree_score(g.source_path, 11), std::clamp(sum, 0.0, 1.0), 1e-15);
  }
}

TEST(PrefixBenchmark, SharedPrefixesShareBonuses) {
  // Two leaves differing only in the last decision differ by exactly that bonus.
  const Path a = path_from_json(R"([{"index":0,"site":"/0.Conv2D.filters","value":32},{"index":0,"site":"/0.Conv2D.kernel_size","value":3},{"index":0,"site":"/1.MaybeSwap.order","value":"first-second"},{"index":0,"site":"/2.Optional.include","value":"exclude"}])");
  Path b = a;
  b.steps.back() = {"/2.Optional.include", 1, Literal{std::string("include")}};
  b.steps.push_back({"/2/0.Dropout.keep_prob", 0, Literal{0.5}});
  const double diff = prefix_tree_score(b, 5) - prefix_tree_score(a, 5);
  const double expect = prefix_tree_bonus("/2.Optional.include", Literal{std::string("include")}, 5) -
                        prefix_tree_bonus("/2.Optional.include", Literal{std::string("exclude")}, 5) +
                        prefix_tree_bonus("/2/0.Dropout.keep_prob", Literal{0.5}, 5);
  EXPECT_NEAR(diff, expect, 1e-15);
}

// --- score tables ---------------------------------------------------------------

TEST(Table, HitAndMiss) {
  const GraphIR g = reference_graph();
  ScoreTable t{{signature_hash(g), 0.625}};
  EXPECT_EQ(table_evaluate(g, t), 0.625);
  t.clear();
  try {
    (void)table_evaluate(g, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownModel);
  }
}

TEST(Table, JsonRoundTripCoversSpace) {
  ScoreTable t;
  Rng rng(13);
  for (const GraphIR& g : small_leaves()) t[signature_hash(g)] = uniform01(rng);
  ASSERT_EQ(t.size(), 24u);
  const ScoreTable back = parse_score_table(score_table_json(t));
  EXPECT_EQ(back, t);
  TableEvaluator ev(std::make_shared<const ScoreTable>(back));
  for (const GraphIR& g : small_leaves()) EXPECT_EQ(ev.evaluate(g), t.at(signature_hash(g)));
}

TEST(Table, RejectsMalformed) {
  EXPECT_THROW((void)parse_score_table("[1,2]"), Error);
  EXPECT_THROW((void)parse_score_table(R"({"xyz": 0.5})"), Error);
  EXPECT_THROW((void)parse_score_table(R"({"00000000000000ab": 1.5})"), Error);
}

// --- external process -----------------------------------------------------------

TEST(External, ReadsScore) { EXPECT_EQ(external_evaluate(reference_graph(), "cat >/dev/null; echo 0.5", 10), 0.5); }

TEST(External, ReceivesGraphJson) {
  // Scores by node count: five nodes in the reference graph.
  const std::string cmd =
      "python3 -c \"import sys, json; g = json.loads(sys.stdin.readline()); print(len(g['nodes']) / 10)\"";
  EXPECT_EQ(external_evaluate(reference_graph(), cmd, 30), 0.5);
}

TEST(External, OutOfRangeIsParseFailure) {
  EXPECT_EQ(failure_of(reference_graph(), "echo 1.5", 10), EvalFailure::Parse);
  EXPECT_EQ(failure_of(reference_graph(), "echo banana", 10), EvalFailure::Parse);
  EXPECT_EQ(failure_of(reference_graph(), "true", 10), EvalFailure::Parse);
}

TEST(External, NonzeroExit) {
  try {
    (void)external_evaluate(reference_graph(), "echo 0.5; exit 3", 10);
    FAIL();
  } catch (const EvaluationFailed& e) {
    EXPECT_EQ(e.reason(), EvalFailure::ExitCode);
    EXPECT_EQ(e.exit_code(), 3);
  }
}

TEST(External, Timeout) {
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(failure_of(reference_graph(), "sleep 30", 0.3), EvalFailure::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
}

// --- caching and construction ---------------------------------------------------

TEST(Cache, CountsHitsAndAgreesWithInner) {
  CachedEvaluator c(std::make_unique<PrefixTreeEvaluator>(21));
  PrefixTreeEvaluator plain(21);
  const auto leaves = small_leaves();
  for (int round = 0; round < 3; ++round)
    for (const GraphIR& g : leaves) EXPECT_EQ(c.evaluate(g), plain.evaluate(g));
  EXPECT_EQ(c.misses(), 24u);
  EXPECT_EQ(c.hits(), 48u);
}

TEST(Cache, FailuresAreNotStored) {
  CachedEvaluator c(std::make_unique<TableEvaluator>(std::make_shared<const ScoreTable>()));
  const GraphIR g = reference_graph();
  EXPECT_THROW((void)c.evaluate(g), Error);
  EXPECT_THROW((void)c.evaluate(g), Error);
  EXPECT_EQ(c.hits(), 0u);
}

TEST(MakeEvaluator, Specs) {
  const GraphIR g = reference_graph();
  EXPECT_EQ(make_evaluator("linear:42")->evaluate(g), linear_ngram_score(g, 42, 0.0));
  EXPECT_EQ(make_evaluator("linear:42:0.1")->evaluate(g), linear_ngram_score(g, 42, 0.1));
  EXPECT_EQ(make_evaluator("prefix:9")->evaluate(g), prefix_tree_score(g.source_path, 9));
  EXPECT_EQ(make_evaluator("cmd:echo 0.25:5")->evaluate(g), 0.25);
  EXPECT_FALSE(make_evaluator("cmd:echo 0.25")->deterministic());

  const auto dir = std::filesystem::temp_directory_path() / "archspace_eval_table";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "t.json") << score_table_json({{signature_hash(g), 0.125}});
  EXPECT_EQ(make_evaluator("table:" + (dir / "t.json").string())->evaluate(g), 0.125);

  for (const char* bad : {"", "linear", "linear:x", "prefix:", "nope:1", "linear:1:-1"})
    EXPECT_THROW((void)make_evaluator(bad), Error) << bad;
}

TEST(Benchmarks, ScoresStayInUnitInterval) {
  Rng gen(17);
  testsupport::GenOptions opt;
  for (int i = 0; i < 1000; ++i) {
    const SpaceExpr s = testsupport::random_space(gen, opt);
    const Path p = sample_uniform(s, Shape({6}), static_cast<std::uint64_t>(i));
    const GraphIR g = compile(s, Shape({6}), p);
    for (double v : {linear_ngram_score(g, i, 0.0), linear_ngram_score(g, i, 0.5), prefix_tree_score(p, i)}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}
