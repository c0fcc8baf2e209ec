#include "archspace/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "archspace/error.hpp"

namespace archspace::kernels {

namespace {

double gram_entry(const DenseMatrix& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) s += x.at(r, i) * x.at(r, j);
  return s;
}

ScoredCandidate score_one(const Traversal& start, std::uint64_t seed, const SurrogateModel& model, int ngram_max) {
  ScoredCandidate out;
  auto t = start.clone();
  Rng rng(seed);
  try {
    rollout(*t, rng);
    out.graph = compile(t->model(), t->path());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ShapeIncompatible && e.code() != ErrorCode::ShapeUnderflow) throw;
    out.path = t->path();
    out.error = e.what();
    return out;
  }
  out.valid = true;
  out.path = out.graph.source_path;
  out.hash = signature_hash(out.graph);
  out.prediction = model.predict(featurize(out.graph, ngram_max));
  return out;
}

BatchResult evaluate_one(Evaluator& evaluator, const GraphIR& graph) {
  BatchResult r;
  try {
    r.score = evaluator.evaluate(graph);
  } catch (const std::exception& e) {
    r.failed = true;
    r.score = 0.0;
    r.error = e.what();
  }
  return r;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<double> gram_serial(const DenseMatrix& x) {
  const std::size_t d = x.cols;
  std::vector<double> g(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) g[i * d + j] = g[j * d + i] = gram_entry(x, i, j);
  return g;
}

std::vector<double> gram(const DenseMatrix& x) {
  const auto d = static_cast<std::ptrdiff_t>(x.cols);
  std::vector<double> g(x.cols * x.cols);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < d; ++i)
    for (std::ptrdiff_t j = i; j < d; ++j) {
      const double v = gram_entry(x, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      g[static_cast<std::size_t>(i * d + j)] = v;
      g[static_cast<std::size_t>(j * d + i)] = v;
    }
  return g;
}

std::vector<ScoredCandidate> score_candidates_serial(const Traversal& start, std::span<const std::uint64_t> seeds,
                                                     const SurrogateModel& model, int ngram_max) {
  std::vector<ScoredCandidate> out;
  out.reserve(seeds.size());
  for (std::uint64_t s : seeds) out.push_back(score_one(start, s, model, ngram_max));
  return out;
}

std::vector<ScoredCandidate> score_candidates(const Traversal& start, std::span<const std::uint64_t> seeds,
                                              const SurrogateModel& model, int ngram_max) {
  const auto n = static_cast<std::ptrdiff_t>(seeds.size());
  std::vector<ScoredCandidate> out(seeds.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = score_one(start, seeds[static_cast<std::size_t>(i)], model, ngram_max);
    } catch (...) {
#pragma omp critical(archspace_score_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::optional<std::size_t> select_best(std::span<const ScoredCandidate> candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.valid) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    if (c.prediction > b.prediction || (c.prediction == b.prediction && c.hash < b.hash)) best = i;
  }
  return best;
}

std::vector<BatchResult> evaluate_batch_serial(Evaluator& evaluator, std::span<const GraphIR> graphs) {
  std::vector<BatchResult> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(evaluate_one(evaluator, g));
  return out;
}

std::vector<BatchResult> evaluate_batch(Evaluator& evaluator, std::span<const GraphIR> graphs) {
  const auto n = static_cast<std::ptrdiff_t>(graphs.size());
  std::vector<BatchResult> out(graphs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = evaluate_one(evaluator, graphs[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace archspace::kernels
