#pragma once

// Data-parallel hot loops. Each has a serial twin that defines the expected
// output; the OpenMP version must match it exactly.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "archspace/evaluators.hpp"
#include "archspace/graph.hpp"
#include "archspace/surrogate.hpp"
#include "archspace/traversal.hpp"

namespace archspace::kernels {

/// Row-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// X'X as a row-major cols x cols matrix. Each entry is summed over rows in
/// order, so both versions are bitwise equal.
std::vector<double> gram_serial(const DenseMatrix& x);
std::vector<double> gram(const DenseMatrix& x);

/// One random rollout scored by the surrogate.
struct ScoredCandidate {
  bool valid = false;
  double prediction = 0.0;
  std::uint64_t hash = 0;
  Path path;
  GraphIR graph;
  std::string error;  // set when the rollout hit a shape error
};

/// Completes a clone of `start` once per seed and predicts each leaf.
std::vector<ScoredCandidate> score_candidates_serial(const Traversal& start, std::span<const std::uint64_t> seeds,
                                                     const SurrogateModel& model, int ngram_max);
std::vector<ScoredCandidate> score_candidates(const Traversal& start, std::span<const std::uint64_t> seeds,
                                              const SurrogateModel& model, int ngram_max);

/// Highest prediction among valid candidates; ties go to the lowest hash,
/// then the lowest index.
std::optional<std::size_t> select_best(std::span<const ScoredCandidate> candidates);

struct BatchResult {
  double score = 0.0;
  bool failed = false;
  std::string error;
};

/// Evaluates every graph; failures become flagged zero scores.
std::vector<BatchResult> evaluate_batch_serial(Evaluator& evaluator, std::span<const GraphIR> graphs);
std::vector<BatchResult> evaluate_batch(Evaluator& evaluator, std::span<const GraphIR> graphs);

/// Worker threads the parallel kernels will use.
int max_threads();

}  // namespace archspace::kernels
