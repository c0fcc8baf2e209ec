#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "archspace/dsl.hpp"
#include "archspace/evaluators.hpp"
#include "archspace/graph.hpp"
#include "archspace/kernels.hpp"
#include "archspace/path.hpp"
#include "archspace/random.hpp"
#include "archspace/shape.hpp"
#include "archspace/surrogate.hpp"
#include "archspace/traversal.hpp"

namespace archspace {

enum class SearcherKind { Random, Mcts, MctsBisect, Smbo };

std::string_view to_string(SearcherKind kind);
/// Accepts "random", "mcts", "mcts_bisect" (or "mcts-bisect") and "smbo".
std::optional<SearcherKind> searcher_kind_from_string(std::string_view name);

/// Defaults are arbitrary but fixed; every knob is overridable.
struct SearcherConfig {
  SearcherKind kind = SearcherKind::Random;
  double c = 0.25;
  std::size_t branch_factor = 2;
  double epsilon = 0.1;
  std::size_t pool = 512;
  int ngram_max = 3;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  /// Random search only: evaluate the whole budget concurrently.
  bool parallel_eval = false;
  /// Record wall-clock time per evaluation (zeroed when false).
  bool timing = true;
};

/// Throws Error(InvalidValue) on out-of-range knobs.
void validate(const SearcherConfig& config);

/// mean + 2c sqrt(2 ln n_parent / n_child); +inf for an unvisited child.
double ucb_score(double mean, std::uint64_t n_parent, std::uint64_t n_child, double c);

/// A model picked by a searcher, before evaluation.
struct Proposal {
  Path path;
  /// Empty when the rollout hit a shape error.
  std::optional<GraphIR> graph;
  std::string error;
};

struct EvalRecord {
  std::size_t step = 0;  // 1-based
  Path path;
  std::uint64_t signature = 0;  // 0 when no graph could be built
  double score = 0.0;
  double best_so_far = 0.0;
  bool failed = false;
  std::string error;
  double wall_ms = 0.0;
  /// SMBO only: training-set size after this evaluation.
  std::optional<std::size_t> surrogate_size;
  std::optional<GraphIR> graph;
};

/// Sequential propose/observe state machine. observe() must follow each
/// propose() before the next propose().
class Searcher {
 public:
  virtual ~Searcher() = default;
  virtual Proposal propose() = 0;
  virtual void observe(const Proposal& proposal, double score, bool failed) = 0;
  virtual std::optional<std::size_t> surrogate_size() const { return std::nullopt; }
};

/// Uniform rollouts from the root.
class RandomSearcher final : public Searcher {
 public:
  RandomSearcher(std::unique_ptr<Traversal> root, std::uint64_t seed);
  Proposal propose() override;
  void observe(const Proposal&, double, bool) override {}

 private:
  std::unique_ptr<Traversal> root_;
  Rng rng_;
};

struct MctsNode {
  std::uint64_t visits = 0;
  double score_sum = 0.0;
  /// One slot per option once the node has been reached; null = unexpanded.
  std::vector<std::unique_ptr<MctsNode>> children;

  double mean() const { return visits ? score_sum / static_cast<double>(visits) : 0.0; }
};

/// UCB tree policy, one expansion per simulation, uniform rollouts.
/// Runs over whichever traversal it is given (raw or bisected).
class MctsSearcher final : public Searcher {
 public:
  MctsSearcher(std::unique_ptr<Traversal> root, double c, std::uint64_t seed);
  Proposal propose() override;
  void observe(const Proposal& proposal, double score, bool failed) override;

  const MctsNode& tree() const { return root_node_; }

 private:
  std::unique_ptr<Traversal> root_;
  double c_;
  Rng rng_;
  MctsNode root_node_;
  std::vector<MctsNode*> pending_;  // nodes on the last simulation's tree path
};

/// Epsilon-greedy rollouts ranked by a ridge surrogate over n-gram features.
class SmboSearcher final : public Searcher {
 public:
  SmboSearcher(std::unique_ptr<Traversal> root, const SearcherConfig& config);
  Proposal propose() override;
  void observe(const Proposal& proposal, double score, bool failed) override;
  std::optional<std::size_t> surrogate_size() const override { return samples_.size(); }

  const SurrogateModel& surrogate() const { return model_; }
  /// Pins the surrogate; observe() keeps collecting samples but stops refitting.
  void freeze_surrogate(SurrogateModel model);
  /// Whether the last proposal came from the exploration coin.
  bool last_was_random() const { return last_random_; }

 private:
  std::unique_ptr<Traversal> root_;
  SearcherConfig config_;
  Rng rng_;
  SurrogateModel model_;
  std::vector<RidgeSample> samples_;
  bool frozen_ = false;
  bool last_random_ = false;
};

/// Completes a clone of `start` with `rng`, compiling the leaf when valid.
Proposal rollout_proposal(const Traversal& start, Rng& rng);

/// Best valid candidate under `model`; ties go to the lowest signature hash.
std::optional<std::size_t> smbo_select(std::span<const GraphIR> pool, const SurrogateModel& model, int ngram_max);

/// Root traversal for a searcher kind (bisected for mcts_bisect).
std::unique_ptr<Traversal> make_traversal(const SearcherConfig& config, const SpaceExpr& space,
                                          const Shape& in_shape);
std::unique_ptr<Searcher> make_searcher(const SearcherConfig& config, const SpaceExpr& space,
                                        const Shape& in_shape);

/// Runs exactly `budget` evaluations. Failed evaluations score 0, are flagged
/// and still consume budget.
std::vector<EvalRecord> run_search(const SearcherConfig& config, const SpaceExpr& space, const Shape& in_shape,
                                   Evaluator& evaluator, std::size_t budget);
/// Same, driving an existing searcher.
std::vector<EvalRecord> run_search(Searcher& searcher, Evaluator& evaluator, std::size_t budget, bool timing = true);

}  // namespace archspace
