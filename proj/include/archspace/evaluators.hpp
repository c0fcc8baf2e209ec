#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "archspace/graph.hpp"
#include "archspace/path.hpp"

namespace archspace {

/// Scores a fully specified model in [0, 1]. Throws EvaluationFailed or
/// Error(UnknownModel) when no score can be produced.
///
/// Implementations must tolerate concurrent evaluate() calls; the random
/// searcher's parallel mode and concurrent repetitions rely on it.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(const GraphIR& graph) = 0;
  /// Equal signatures always produce equal scores.
  virtual bool deterministic() const = 0;
  virtual bool cacheable() const { return deterministic(); }
};

// --- synthetic benchmarks ----------------------------------------------------

/// clip01(sigmoid(sum_k w_k x_k) + N(0, sigma)) with x = featurize(graph) and
/// w_k uniform in [-1, 1] drawn from a hash of (seed, feature key). The noise
/// draw is seeded by (seed, signature), so the score is deterministic.
double linear_ngram_score(const GraphIR& graph, std::uint64_t seed, double noise_sigma, int ngram_max = 3);
/// Weight the linear benchmark assigns to one feature key.
double linear_ngram_weight(std::string_view feature_key, std::uint64_t seed);

/// clip01(0.5 + sum over path steps of a bonus in [-0.05, 0.05] drawn from a
/// hash of (seed, site, value)).
double prefix_tree_score(const Path& path, std::uint64_t seed);
double prefix_tree_bonus(std::string_view site, const Literal& value, std::uint64_t seed);

class LinearNgramEvaluator final : public Evaluator {
 public:
  LinearNgramEvaluator(std::uint64_t seed, double noise_sigma, int ngram_max = 3)
      : seed_(seed), sigma_(noise_sigma), ngram_max_(ngram_max) {}
  double evaluate(const GraphIR& graph) override { return linear_ngram_score(graph, seed_, sigma_, ngram_max_); }
  bool deterministic() const override { return true; }

 private:
  std::uint64_t seed_;
  double sigma_;
  int ngram_max_;
};

class PrefixTreeEvaluator final : public Evaluator {
 public:
  explicit PrefixTreeEvaluator(std::uint64_t seed) : seed_(seed) {}
  double evaluate(const GraphIR& graph) override { return prefix_tree_score(graph.source_path, seed_); }
  bool deterministic() const override { return true; }

 private:
  std::uint64_t seed_;
};

// --- score tables ------------------------------------------------------------

using ScoreTable = std::unordered_map<std::uint64_t, double>;

/// JSON object mapping 16-digit hex signature hashes to scores.
ScoreTable parse_score_table(std::string_view json_text);
std::string score_table_json(const ScoreTable& table);
ScoreTable load_score_table(const std::string& file);

/// Exact lookup by signature hash. Throws Error(UnknownModel).
double table_evaluate(const GraphIR& graph, const ScoreTable& table);

class TableEvaluator final : public Evaluator {
 public:
  explicit TableEvaluator(std::shared_ptr<const ScoreTable> table) : table_(std::move(table)) {}
  double evaluate(const GraphIR& graph) override { return table_evaluate(graph, *table_); }
  bool deterministic() const override { return true; }

 private:
  std::shared_ptr<const ScoreTable> table_;
};

// --- external process --------------------------------------------------------

/// Runs `command` through /bin/sh, writes to_json(graph) plus LF to its stdin
/// and reads one decimal in [0, 1] from its stdout.
/// Throws EvaluationFailed{exit_code | timeout | parse | spawn}.
double external_evaluate(const GraphIR& graph, const std::string& command, double timeout_s);

class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(std::string command, double timeout_s) : command_(std::move(command)), timeout_s_(timeout_s) {}
  double evaluate(const GraphIR& graph) override { return external_evaluate(graph, command_, timeout_s_); }
  /// Real training is rarely reproducible, but scores are still cached by
  /// signature so repeated leaves do not retrain.
  bool deterministic() const override { return false; }
  bool cacheable() const override { return true; }

 private:
  std::string command_;
  double timeout_s_;
};

// --- memoization -------------------------------------------------------------

/// Memoizes successful scores by signature hash. Failures pass through and
/// are not stored.
class CachedEvaluator final : public Evaluator {
 public:
  explicit CachedEvaluator(std::unique_ptr<Evaluator> inner) : inner_(std::move(inner)) {}

  double evaluate(const GraphIR& graph) override;
  bool deterministic() const override { return inner_->deterministic(); }

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::unique_ptr<Evaluator> inner_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, double> memo_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

std::unique_ptr<Evaluator> cached(std::unique_ptr<Evaluator> inner);

/// Builds an evaluator from "linear:<seed>[:sigma]", "prefix:<seed>",
/// "table:<file>" or "cmd:<program>[:timeout]". Throws Error(InvalidValue).
std::unique_ptr<Evaluator> make_evaluator(std::string_view spec);

}  // namespace archspace
