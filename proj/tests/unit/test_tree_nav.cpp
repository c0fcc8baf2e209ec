#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "archspace/error.hpp"
#include "archspace/graph.hpp"
#include "archspace/traversal.hpp"
#include "support.hpp"

using namespace archspace;

namespace {

// Leaves are recompiled from a fresh instance, so a wrapper cannot cheat.
std::multiset<std::string> leaf_signatures(const Traversal& root, const SpaceExpr& space, const Shape& in) {
  std::multiset<std::string> out;
  for (const Path& p : enumerate(root, 1'000'000).paths) out.insert(signature_json(compile(space, in, p)));
  return out;
}

// Probability of each leaf under uniform choice at every surfaced decision.
void leaf_probabilities(const Traversal& t, double p, std::map<std::string, double>& out) {
  if (t.done()) {
    out[path_to_json(t.path())] += p;
    return;
  }
  const std::size_t n = t.decision().count;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = t.clone();
    c->take(i);
    leaf_probabilities(*c, p / static_cast<double>(n), out);
  }
}

void check_partition(const MetaChoiceNode& n, std::size_t bf) {
  if (n.hi - n.lo == 1) {
    EXPECT_TRUE(n.children.empty());
    return;
  }
  ASSERT_FALSE(n.children.empty());
  ASSERT_LE(n.children.size(), bf);
  std::size_t at = n.lo;
  for (const auto& c : n.children) {
    ASSERT_EQ(c.lo, at);
    ASSERT_GT(c.hi, c.lo);
    at = c.hi;
    check_partition(c, bf);
  }
  ASSERT_EQ(at, n.hi);
}

std::size_t max_depth_for_site(const Traversal& root, const std::string& raw_site) {
  std::size_t best = 0;
  std::function<void(const Traversal&, std::size_t)> walk = [&](const Traversal& t, std::size_t d) {
    if (t.done()) return;
    const Decision dec = t.decision();
    const bool mine = dec.site.rfind(raw_site, 0) == 0;
    if (mine) best = std::max(best, d + 1);
    for (std::size_t i = 0; i < dec.count; ++i) {
      auto c = t.clone();
      c->take(i);
      walk(*c, mine ? d + 1 : 0);
    }
  };
  walk(root, 0);
  return best;
}

HyperparamDomain ints_domain(std::vector<std::int64_t> v) {
  HyperparamDomain d{"x", {}};
  for (auto x : v) d.values.emplace_back(x);
  return d;
}

}  // namespace

TEST(Sample, NoChoicesNoSteps) { EXPECT_TRUE(sample_uniform(parse("(ReLU)"), Shape({4}), 99).steps.empty()); }

TEST(Sample, SameSeedSamePath) {
  const SpaceExpr s = testsupport::small_space();
  EXPECT_EQ(sample_uniform(s, testsupport::image_shape(), 5), sample_uniform(s, testsupport::image_shape(), 5));
}

TEST(Sample, LeafFrequenciesWithinFiveSigma) {
  const SpaceExpr s = testsupport::small_space();
  RawTraversal root(s, testsupport::image_shape());
  std::map<std::string, double> prob;
  leaf_probabilities(root, 1.0, prob);
  ASSERT_EQ(prob.size(), 24u);
  std::map<std::string, int> count;
  const int n = 10'000;
  for (int i = 0; i < n; ++i) ++count[path_to_json(sample_uniform(s, testsupport::image_shape(), 1000 + i))];
  for (const auto& [leaf, p] : prob) {
    const double sigma = std::sqrt(n * p * (1 - p));
    EXPECT_LE(std::abs(count[leaf] - n * p), 5 * sigma) << leaf;
  }
}

TEST(Sample, ShapeFailureNamesSite) {
  const SpaceExpr s = parse("(Concat (Conv2D [8] [5] [1] [\"VALID\"]) (Conv2D [8] [3, 5] [1] [\"VALID\"]))");
  bool failed = false;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    try {
      (void)sample_uniform(s, Shape({7, 7, 3}), seed);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::SampleFailed);
      EXPECT_NE(std::string(e.what()).find("/1.Conv2D.kernel_size"), std::string::npos) << e.what();
      failed = true;
    }
  }
  EXPECT_TRUE(failed);
}

TEST(Enumerate, Examples) {
  EXPECT_EQ(enumerate(testsupport::small_space(), testsupport::image_shape(), 1000).paths.size(), 24u);
  EXPECT_EQ(enumerate(parse("(Or (ReLU) (ReLU))"), Shape({3}), 1000).paths.size(), 2u);
  EXPECT_EQ(enumerate(parse("(Repeat (Dropout [0.5, 0.9]) [1, 2])"), Shape({3}), 1000).paths.size(), 6u);
  EXPECT_EQ(enumerate(parse("(Empty)"), Shape({3}), 1000).paths.size(), 1u);
}

TEST(Enumerate, LimitTruncates) {
  const Enumeration e = enumerate(testsupport::small_space(), testsupport::image_shape(), 5);
  EXPECT_EQ(e.paths.size(), 5u);
  EXPECT_TRUE(e.truncated);
  EXPECT_FALSE(enumerate(testsupport::small_space(), testsupport::image_shape(), 24).truncated);
}

TEST(Enumerate, PrunesInvalidSubtrees) {
  // kernel 5 VALID on 4x4 underflows; kernel 3 survives.
  const Enumeration e = enumerate(parse("(Conv2D [8] [3, 5] [1] [\"VALID\"])"), Shape({4, 4, 3}), 100);
  EXPECT_EQ(e.paths.size(), 1u);
  ASSERT_EQ(e.pruned.size(), 1u);
  EXPECT_NE(e.pruned[0].find("kernel_size=1"), std::string::npos) << e.pruned[0];
}

TEST(Enumerate, DepthFirstLeftToRight) {
  const auto paths = enumerate(testsupport::small_space(), testsupport::image_shape(), 100).paths;
  for (std::size_t i = 1; i < paths.size(); ++i) {
    std::vector<std::size_t> a, b;
    for (const auto& s : paths[i - 1].steps) a.push_back(s.index);
    for (const auto& s : paths[i].steps) b.push_back(s.index);
    EXPECT_LT(a, b);
  }
}

TEST(Replay, EveryEnumeratedLeafIsSpecified) {
  const SpaceExpr s = testsupport::small_space();
  for (const Path& p : enumerate(s, testsupport::image_shape(), 100).paths)
    EXPECT_TRUE(replay(s, testsupport::image_shape(), p)->is_specified());
}

TEST(Replay, SwappedStepsMismatch) {
  Path p = testsupport::reference_path();
  std::swap(p.steps[0], p.steps[1]);
  try {
    (void)replay(testsupport::small_space(), testsupport::image_shape(), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PathMismatch);
  }
}

TEST(Replay, WrongValueShortAndLongPaths) {
  const SpaceExpr s = testsupport::small_space();
  auto code = [&](const Path& p) {
    try {
      (void)replay(s, testsupport::image_shape(), p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::EvaluationFailed;
  };
  Path wrong = testsupport::reference_path();
  wrong.steps[0].value = std::int64_t{48};
  EXPECT_EQ(code(wrong), ErrorCode::PathMismatch);
  Path shorter = testsupport::reference_path();
  shorter.steps.pop_back();
  EXPECT_EQ(code(shorter), ErrorCode::PathMismatch);
  Path longer = testsupport::reference_path();
  longer.steps.push_back(longer.steps.back());
  EXPECT_EQ(code(longer), ErrorCode::PathMismatch);
}

TEST(Replay, ReferenceSequence) {
  const GraphIR g = compile(testsupport::small_space(), testsupport::image_shape(), testsupport::reference_path());
  EXPECT_EQ(module_sequence(g), (std::vector<std::string>{"Conv2D", "BatchNorm", "ReLU", "Affine"}));
  std::vector<std::string> ops;
  for (const auto& n : g.nodes) ops.emplace_back(to_string(n.op));
  EXPECT_EQ(ops, (std::vector<std::string>{"Conv2D", "BatchNorm", "ReLU", "Flatten", "Affine"}));
}

TEST(Bisect, FiveValueSplit) {
  const MetaChoiceNode root = restructure_bisect(ints_domain({16, 32, 48, 64, 80}), 2);
  ASSERT_EQ(root.children.size(), 2u);
  EXPECT_EQ(root.children[0].lo, 0u);
  EXPECT_EQ(root.children[0].hi, 3u);
  EXPECT_EQ(root.children[1].lo, 3u);
  EXPECT_EQ(root.children[1].hi, 5u);
  const auto& left = root.children[0];
  ASSERT_EQ(left.children.size(), 2u);
  EXPECT_EQ(left.children[0].lo, 0u);
  EXPECT_EQ(left.children[0].hi, 2u);
  EXPECT_EQ(left.children[1].lo, 2u);
  EXPECT_EQ(left.children[1].hi, 3u);
  check_partition(root, 2);
}

TEST(Bisect, WideBranchFactorIsFlat) {
  for (std::size_t bf : {5u, 6u, 10u}) {
    const MetaChoiceNode root = restructure_bisect(ints_domain({16, 32, 48, 64, 80}), bf);
    ASSERT_EQ(root.children.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(root.children[i].lo, i);
      EXPECT_TRUE(root.children[i].children.empty());
    }
  }
}

TEST(Bisect, SingleValueIsLeaf) {
  const MetaChoiceNode root = restructure_bisect(ints_domain({7}), 2);
  EXPECT_TRUE(root.children.empty());
  EXPECT_THROW((void)restructure_bisect(ints_domain({1, 2}), 1), Error);
}

TEST(Bisect, PartitionProperty) {
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t bf = 2; bf <= 6; ++bf) {
      std::vector<std::int64_t> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int64_t>(i);
      check_partition(restructure_bisect(ints_domain(v), bf), bf);
    }
}

TEST(Bisect, WrapperKeepsSmallSpaceLeaves) {
  const SpaceExpr s = testsupport::small_space();
  auto wrapped = wrap_bisected(std::make_unique<RawTraversal>(s, testsupport::image_shape()), 2);
  EXPECT_EQ(enumerate(*wrapped, 1000).paths.size(), 24u);
}

TEST(Bisect, FiveValuesDepthThree) {
  const SpaceExpr s = parse("(Affine [16, 32, 48, 64, 80])");
  auto wrapped = wrap_bisected(std::make_unique<RawTraversal>(s, Shape({4})), 2);
  EXPECT_EQ(max_depth_for_site(*wrapped, "/.Affine.units"), 3u);
  EXPECT_EQ(max_depth_for_site(RawTraversal(s, Shape({4})), "/.Affine.units"), 1u);
}

TEST(Bisect, AllBinaryIsIdentity) {
  const SpaceExpr s = testsupport::small_space();
  RawTraversal raw(s, testsupport::image_shape());
  auto wrapped = wrap_bisected(raw.clone(), 2);
  Rng a(3);
  for (int i = 0; i < 50; ++i) {
    auto x = raw.clone();
    auto y = wrapped->clone();
    while (!x->done()) {
      ASSERT_EQ(x->decision().site, y->decision().site);
      ASSERT_EQ(x->decision().count, y->decision().count);
      const std::size_t k = uniform_index(a, x->decision().count);
      x->take(k);
      y->take(k);
    }
    ASSERT_TRUE(y->done());
    ASSERT_EQ(x->path(), y->path());
  }
}

// --- properties over generated spaces ---------------------------------------------

TEST(Properties, LeafCountMatchesBruteForce) {
  Rng gen(29);
  testsupport::GenOptions opt;
  for (int i = 0; i < 1000; ++i) {
    const SpaceExpr s = testsupport::random_bounded_space(gen, opt, 10'000);
    const std::uint64_t want = testsupport::brute_force_leaf_count(s, 10'000);
    ASSERT_EQ(count_leaves(RawTraversal(s, Shape({6})), 20'000), want) << pretty_print(s);
  }
}

TEST(Properties, BisectionPreservesLeafMultiset) {
  Rng gen(31);
  testsupport::GenOptions opt;
  opt.max_values = 6;
  opt.spatial = true;
  for (int checked = 0; checked < 1000;) {
    const SpaceExpr s = testsupport::random_bounded_space(gen, opt, 2'000);
    std::unique_ptr<RawTraversal> raw;
    try {
      raw = std::make_unique<RawTraversal>(s, Shape({8, 8, 3}));
    } catch (const Error&) {
      continue;
    }
    for (std::size_t bf : {2u, 3u}) {
      auto wrapped = wrap_bisected(raw->clone(), bf);
      ASSERT_EQ(leaf_signatures(*raw, s, Shape({8, 8, 3})), leaf_signatures(*wrapped, s, Shape({8, 8, 3}))) << pretty_print(s);
    }
    ++checked;
  }
}

TEST(Properties, ReplayOfSampleIsTotal) {
  Rng gen(37);
  testsupport::GenOptions opt;
  for (int i = 0; i < 1000; ++i) {
    const SpaceExpr s = testsupport::random_space(gen, opt);
    const Path p = sample_uniform(s, Shape({6}), static_cast<std::uint64_t>(i) * 7919);
    ASSERT_NO_THROW((void)replay(s, Shape({6}), p)) << pretty_print(s);
  }
}
