#include "archspace/searchers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "archspace/error.hpp"
#include "archspace/hashing.hpp"

namespace archspace {

namespace {

bool is_shape_error(const Error& e) {
  return e.code() == ErrorCode::ShapeIncompatible || e.code() == ErrorCode::ShapeUnderflow;
}

// Turns a finished (or broken) traversal into a proposal.
Proposal finish(Traversal& t) {
  Proposal p;
  try {
    p.graph = compile(t.model(), t.path());
    p.path = p.graph->source_path;
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    p.path = t.path();
    p.error = e.what();
  }
  return p;
}

}  // namespace

std::string_view to_string(SearcherKind kind) {
  switch (kind) {
    case SearcherKind::Random: return "random";
    case SearcherKind::Mcts: return "mcts";
    case SearcherKind::MctsBisect: return "mcts_bisect";
    case SearcherKind::Smbo: return "smbo";
  }
  return "?";
}

std::optional<SearcherKind> searcher_kind_from_string(std::string_view name) {
  if (name == "random") return SearcherKind::Random;
  if (name == "mcts") return SearcherKind::Mcts;
  if (name == "mcts_bisect" || name == "mcts-bisect") return SearcherKind::MctsBisect;
  if (name == "smbo") return SearcherKind::Smbo;
  return std::nullopt;
}

void validate(const SearcherConfig& config) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidValue, what); };
  if (!(config.c >= 0.0) || !std::isfinite(config.c)) bad("c must be >= 0");
  if (config.branch_factor < 2) bad("branch factor must be >= 2");
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) bad("epsilon must lie in [0, 1]");
  if (config.pool < 1) bad("rollout pool must be >= 1");
  if (config.ngram_max < 1) bad("ngram_max must be >= 1");
  if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) bad("lambda must be > 0");
}

double ucb_score(double mean, std::uint64_t n_parent, std::uint64_t n_child, double c) {
  if (n_child == 0) return std::numeric_limits<double>::infinity();
  return mean + 2.0 * c * std::sqrt(2.0 * std::log(static_cast<double>(n_parent)) / static_cast<double>(n_child));
}

Proposal rollout_proposal(const Traversal& start, Rng& rng) {
  auto t = start.clone();
  try {
    rollout(*t, rng);
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    return Proposal{t->path(), std::nullopt, e.what()};
  }
  return finish(*t);
}

// --- random ------------------------------------------------------------------

RandomSearcher::RandomSearcher(std::unique_ptr<Traversal> root, std::uint64_t seed)
    : root_(std::move(root)), rng_(seed) {}

Proposal RandomSearcher::propose() { return rollout_proposal(*root_, rng_); }

// --- MCTS ----------------------------------------------------------------------

MctsSearcher::MctsSearcher(std::unique_ptr<Traversal> root, double c, std::uint64_t seed)
    : root_(std::move(root)), c_(c), rng_(seed) {}

Proposal MctsSearcher::propose() {
  pending_.assign(1, &root_node_);
  auto t = root_->clone();
  MctsNode* node = &root_node_;
  try {
    while (!t->done()) {
      const Decision d = t->decision();
      if (node->children.empty()) node->children.resize(d.count);

      std::vector<std::size_t> unexpanded;
      for (std::size_t i = 0; i < node->children.size(); ++i)
        if (!node->children[i]) unexpanded.push_back(i);

      if (!unexpanded.empty()) {
        const std::size_t pick = unexpanded[uniform_index(rng_, unexpanded.size())];
        node->children[pick] = std::make_unique<MctsNode>();
        pending_.push_back(node->children[pick].get());
        t->take(pick);
        break;  // one expansion per simulation; the rest is rollout
      }

      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < node->children.size(); ++i) {
        const MctsNode& ch = *node->children[i];
        const double s = ucb_score(ch.mean(), node->visits, ch.visits, c_);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      node = node->children[best].get();
      pending_.push_back(node);
      t->take(best);
    }
    rollout(*t, rng_);
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    return Proposal{t->path(), std::nullopt, e.what()};
  }
  return finish(*t);
}

void MctsSearcher::observe(const Proposal&, double score, bool) {
  for (MctsNode* n : pending_) {
    ++n->visits;
    n->score_sum += score;
  }
  pending_.clear();
}

// --- SMBO ----------------------------------------------------------------------

SmboSearcher::SmboSearcher(std::unique_ptr<Traversal> root, const SearcherConfig& config)
    : root_(std::move(root)), config_(config), rng_(config.seed) {
  validate(config_);
}

void SmboSearcher::freeze_surrogate(SurrogateModel model) {
  model_ = std::move(model);
  frozen_ = true;
}

Proposal SmboSearcher::propose() {
  last_random_ = uniform01(rng_) < config_.epsilon;
  if (last_random_) return rollout_proposal(*root_, rng_);

  // Every candidate gets its own seed up front so the parallel scorer sees
  // exactly the pool a serial loop would.
  std::vector<std::uint64_t> seeds(config_.pool);
  for (auto& s : seeds) s = rng_();
  auto candidates = kernels::score_candidates(*root_, seeds, model_, config_.ngram_max);
  const auto best = kernels::select_best(candidates);
  if (!best) return Proposal{candidates.front().path, std::nullopt, "every candidate rollout was shape-invalid"};
  auto& c = candidates[*best];
  return Proposal{std::move(c.path), std::move(c.graph), {}};
}

void SmboSearcher::observe(const Proposal& proposal, double score, bool) {
  RidgeSample s;
  if (proposal.graph) s.x = featurize(*proposal.graph, config_.ngram_max);
  s.y = score;
  samples_.push_back(std::move(s));
  if (!frozen_) model_ = ridge_fit(samples_, config_.lambda);
}

std::optional<std::size_t> smbo_select(std::span<const GraphIR> pool, const SurrogateModel& model, int ngram_max) {
  std::vector<kernels::ScoredCandidate> scored(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scored[i].valid = true;
    scored[i].hash = signature_hash(pool[i]);
    scored[i].prediction = model.predict(featurize(pool[i], ngram_max));
  }
  return kernels::select_best(scored);
}

// --- driver --------------------------------------------------------------------

std::unique_ptr<Traversal> make_traversal(const SearcherConfig& config, const SpaceExpr& space,
                                          const Shape& in_shape) {
  std::unique_ptr<Traversal> t = std::make_unique<RawTraversal>(space, in_shape);
  if (config.kind == SearcherKind::MctsBisect) t = wrap_bisected(std::move(t), config.branch_factor);
  return t;
}

std::unique_ptr<Searcher> make_searcher(const SearcherConfig& config, const SpaceExpr& space,
                                        const Shape& in_shape) {
  validate(config);
  auto root = make_traversal(config, space, in_shape);
  switch (config.kind) {
    case SearcherKind::Random: return std::make_unique<RandomSearcher>(std::move(root), config.seed);
    case SearcherKind::Mcts:
    case SearcherKind::MctsBisect: return std::make_unique<MctsSearcher>(std::move(root), config.c, config.seed);
    case SearcherKind::Smbo: return std::make_unique<SmboSearcher>(std::move(root), config);
  }
  throw Error(ErrorCode::InvalidValue, "unknown searcher kind");
}

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  double score = 0.0;
  bool failed = false;
  std::string error;
  double wall_ms = 0.0;
};

Outcome evaluate_proposal(Evaluator& evaluator, const Proposal& p, bool timing) {
  Outcome o;
  if (!p.graph) {
    o.failed = true;
    o.error = p.error;
    return o;
  }
  const auto t0 = Clock::now();
  kernels::BatchResult r = kernels::evaluate_batch_serial(evaluator, std::span(&*p.graph, 1)).front();
  if (timing) o.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  o.score = r.score;
  o.failed = r.failed;
  o.error = std::move(r.error);
  return o;
}

EvalRecord make_record(std::size_t step, Proposal&& p, Outcome&& o, double& best) {
  EvalRecord r;
  r.step = step;
  r.signature = p.graph ? signature_hash(*p.graph) : 0;
  r.path = std::move(p.path);
  r.graph = std::move(p.graph);
  r.score = o.score;
  r.failed = o.failed;
  r.error = std::move(o.error);
  r.wall_ms = o.wall_ms;
  best = step == 1 ? r.score : std::max(best, r.score);
  r.best_so_far = best;
  return r;
}

}  // namespace

std::vector<EvalRecord> run_search(Searcher& searcher, Evaluator& evaluator, std::size_t budget, bool timing) {
  std::vector<EvalRecord> records;
  records.reserve(budget);
  double best = 0.0;
  for (std::size_t step = 1; step <= budget; ++step) {
    Proposal p = searcher.propose();
    Outcome o = evaluate_proposal(evaluator, p, timing);
    searcher.observe(p, o.score, o.failed);
    records.push_back(make_record(step, std::move(p), std::move(o), best));
    records.back().surrogate_size = searcher.surrogate_size();
  }
  return records;
}

std::vector<EvalRecord> run_search(const SearcherConfig& config, const SpaceExpr& space, const Shape& in_shape,
                                   Evaluator& evaluator, std::size_t budget) {
  if (budget < 1) throw Error(ErrorCode::InvalidValue, "budget must be >= 1");
  auto searcher = make_searcher(config, space, in_shape);
  if (config.kind != SearcherKind::Random || !config.parallel_eval)
    return run_search(*searcher, evaluator, budget, config.timing);

  // Random proposals do not depend on scores: draw them all, then evaluate
  // the batch concurrently. Records match the sequential run.
  std::vector<Proposal> proposals;
  proposals.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) proposals.push_back(searcher->propose());
  std::vector<Outcome> outcomes(budget);
  const auto n = static_cast<std::ptrdiff_t>(budget);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    outcomes[static_cast<std::size_t>(i)] =
        evaluate_proposal(evaluator, proposals[static_cast<std::size_t>(i)], config.timing);

  std::vector<EvalRecord> records;
  records.reserve(budget);
  double best = 0.0;
  for (std::size_t i = 0; i < budget; ++i)
    records.push_back(make_record(i + 1, std::move(proposals[i]), std::move(outcomes[i]), best));
  return records;
}

}  // namespace archspace
