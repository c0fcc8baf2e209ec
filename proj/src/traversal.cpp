#include "archspace/traversal.hpp"

#include <functional>

#include "archspace/error.hpp"

namespace archspace {

namespace {

bool is_shape_error(const Error& e) {
  return e.code() == ErrorCode::ShapeIncompatible || e.code() == ErrorCode::ShapeUnderflow;
}

}  // namespace

// ---------------------------------------------------------------------------

RawTraversal::RawTraversal(const SpaceExpr& space, const Shape& in_shape) : root_(instantiate(space)) {
  root_->initialize(in_shape);
  check_leaf();
}

Decision RawTraversal::decision() const {
  Choice c = root_->get_choices();
  return {std::move(c.site_id), c.options.size()};
}

void RawTraversal::take(std::size_t option) {
  Choice c = root_->get_choices();
  if (option >= c.options.size())
    throw Error(ErrorCode::IndexOutOfRange, c.site_id + ": option " + std::to_string(option));
  root_->choose(option);
  path_.steps.push_back({std::move(c.site_id), option, std::move(c.options[option])});
  check_leaf();
}

// Composites validate intermediate shapes as they go; the last one is only
// computed here.
void RawTraversal::check_leaf() const {
  if (root_->is_specified()) (void)root_->get_outdim();
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> split_range(std::size_t lo, std::size_t hi,
                                                             std::size_t branch_factor) {
  const std::size_t n = hi - lo;
  const std::size_t parts = std::min(n, branch_factor);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (parts == 0) return out;
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  std::size_t at = lo;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.emplace_back(at, at + len);
    at += len;
  }
  return out;
}

namespace {

MetaChoiceNode build_meta(std::size_t lo, std::size_t hi, std::size_t bf) {
  MetaChoiceNode node{lo, hi, {}};
  if (hi - lo > 1)
    for (auto [a, b] : split_range(lo, hi, bf)) node.children.push_back(build_meta(a, b, bf));
  return node;
}

}  // namespace

MetaChoiceNode restructure_bisect(const HyperparamDomain& domain, std::size_t branch_factor) {
  if (branch_factor < 2) throw Error(ErrorCode::InvalidValue, "branch factor must be >= 2");
  return build_meta(0, domain.values.size(), branch_factor);
}

BisectedTraversal::BisectedTraversal(std::unique_ptr<Traversal> inner, std::size_t branch_factor)
    : inner_(std::move(inner)), branch_factor_(branch_factor) {
  if (branch_factor_ < 2) throw Error(ErrorCode::InvalidValue, "branch factor must be >= 2");
}

BisectedTraversal::BisectedTraversal(const BisectedTraversal& other)
    : inner_(other.inner_->clone()), branch_factor_(other.branch_factor_), range_(other.range_) {}

Decision BisectedTraversal::decision() const {
  Decision raw = inner_->decision();
  if (raw.count <= branch_factor_) return raw;
  auto [lo, hi] = range_.value_or(std::pair<std::size_t, std::size_t>{0, raw.count});
  return {raw.site + "#" + std::to_string(lo) + ":" + std::to_string(hi), split_range(lo, hi, branch_factor_).size()};
}

void BisectedTraversal::take(std::size_t option) {
  Decision raw = inner_->decision();
  if (raw.count <= branch_factor_) {
    inner_->take(option);
    return;
  }
  auto [lo, hi] = range_.value_or(std::pair<std::size_t, std::size_t>{0, raw.count});
  auto parts = split_range(lo, hi, branch_factor_);
  if (option >= parts.size())
    throw Error(ErrorCode::IndexOutOfRange, raw.site + ": option " + std::to_string(option));
  auto part = parts[option];
  if (part.second - part.first == 1) {
    range_.reset();
    inner_->take(part.first);
  } else {
    range_ = part;
  }
}

std::unique_ptr<Traversal> wrap_bisected(std::unique_ptr<Traversal> inner, std::size_t branch_factor) {
  return std::make_unique<BisectedTraversal>(std::move(inner), branch_factor);
}

// ---------------------------------------------------------------------------

void rollout(Traversal& t, Rng& rng) {
  while (!t.done()) t.take(uniform_index(rng, t.decision().count));
}

Path sample_uniform(const SpaceExpr& space, const Shape& in_shape, std::uint64_t seed) {
  Rng rng(seed);
  std::optional<RawTraversal> t;
  try {
    t.emplace(space, in_shape);
  } catch (const Error& e) {
    if (!is_shape_error(e)) throw;
    throw Error(ErrorCode::SampleFailed, std::string("<root>: ") + e.what());
  }
  while (!t->done()) {
    Decision d = t->decision();
    try {
      t->take(uniform_index(rng, d.count));
    } catch (const Error& e) {
      if (!is_shape_error(e)) throw;
      throw Error(ErrorCode::SampleFailed, d.site + ": " + e.what());
    }
  }
  return t->path();
}

namespace {

// Returns false once the walk should stop.
bool walk(std::unique_ptr<Traversal> t, std::size_t limit, Enumeration& out) {
  if (t->done()) {
    if (out.paths.size() == limit) {
      out.truncated = true;
      return false;
    }
    out.paths.push_back(t->path());
    return true;
  }
  const Decision d = t->decision();
  for (std::size_t i = 0; i < d.count; ++i) {
    std::unique_ptr<Traversal> child = (i + 1 == d.count) ? std::move(t) : t->clone();
    try {
      child->take(i);
    } catch (const Error& e) {
      if (!is_shape_error(e)) throw;
      out.pruned.push_back(d.site + "=" + std::to_string(i) + ": " + e.what());
      continue;
    }
    if (!walk(std::move(child), limit, out)) return false;
  }
  return true;
}

std::size_t count_below(std::unique_ptr<Traversal> t, std::size_t cap, std::size_t& total) {
  if (t->done()) return ++total;
  const std::size_t n = t->decision().count;
  for (std::size_t i = 0; i < n && total <= cap; ++i) {
    std::unique_ptr<Traversal> child = (i + 1 == n) ? std::move(t) : t->clone();
    try {
      child->take(i);
    } catch (const Error& e) {
      if (!is_shape_error(e)) throw;
      continue;
    }
    count_below(std::move(child), cap, total);
  }
  return total;
}

}  // namespace

Enumeration enumerate(const Traversal& start, std::size_t limit) {
  Enumeration out;
  walk(start.clone(), limit, out);
  return out;
}

Enumeration enumerate(const SpaceExpr& space, const Shape& in_shape, std::size_t limit) {
  return enumerate(RawTraversal(space, in_shape), limit);
}

std::size_t count_leaves(const Traversal& start, std::size_t cap) {
  std::size_t total = 0;
  count_below(start.clone(), cap, total);
  return std::min(total, cap + 1);
}

ModuleBox replay(const SpaceExpr& space, const Shape& in_shape, const Path& path) {
  ModuleBox root = instantiate(space);
  root->initialize(in_shape);
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const PathStep& step = path.steps[i];
    const std::string where = "step " + std::to_string(i) + " (" + step.site + ")";
    if (root->is_specified()) throw Error(ErrorCode::PathMismatch, where + ": model already fully specified");
    Choice c = root->get_choices();
    if (c.site_id != step.site)
      throw Error(ErrorCode::PathMismatch, where + ": live decision is " + c.site_id);
    if (step.index >= c.options.size() || c.options[step.index] != step.value)
      throw Error(ErrorCode::PathMismatch, where + ": option " + std::to_string(step.index) + " = " +
                                               format_literal(step.value) + " is not offered");
    root->choose(step.index);
  }
  if (!root->is_specified()) throw Error(ErrorCode::PathMismatch, "path ends before the model is fully specified");
  (void)root->get_outdim();
  return root;
}

}  // namespace archspace
