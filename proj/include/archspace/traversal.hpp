#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "archspace/dsl.hpp"
#include "archspace/module.hpp"
#include "archspace/path.hpp"
#include "archspace/random.hpp"
#include "archspace/shape.hpp"

namespace archspace {

/// One internal node of the search tree as seen by a searcher.
struct Decision {
  std::string site;
  std::size_t count = 0;
};

/// Walks the search tree from the root to a leaf. Searchers only ever talk to
/// this interface, so restructured trees are drop-in replacements.
///
/// take() may throw ShapeIncompatible or ShapeUnderflow when the chosen
/// branch leads to an invalid model; the traversal is unusable afterwards.
class Traversal {
 public:
  virtual ~Traversal() = default;
  virtual std::unique_ptr<Traversal> clone() const = 0;
  virtual bool done() const = 0;
  virtual Decision decision() const = 0;
  virtual void take(std::size_t option) = 0;
  /// Raw decisions taken so far.
  virtual const Path& path() const = 0;
  /// The module tree being specified.
  virtual const Module& model() const = 0;
};

/// Traversal over the module's own choices.
class RawTraversal final : public Traversal {
 public:
  RawTraversal(const SpaceExpr& space, const Shape& in_shape);

  std::unique_ptr<Traversal> clone() const override { return std::make_unique<RawTraversal>(*this); }
  bool done() const override { return root_->is_specified(); }
  Decision decision() const override;
  void take(std::size_t option) override;
  const Path& path() const override { return path_; }
  const Module& model() const override { return *root_; }

  /// Current raw choice including option values.
  Choice choice() const { return root_->get_choices(); }

 private:
  void check_leaf() const;

  ModuleBox root_;
  Path path_;
};

/// Contiguous slice [lo, hi) of a domain's ordered values.
struct MetaChoiceNode {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::vector<MetaChoiceNode> children;
};

/// Splits [lo, hi) into at most `branch_factor` contiguous parts; the first
/// (n mod branch_factor) parts take one extra element.
std::vector<std::pair<std::size_t, std::size_t>> split_range(std::size_t lo, std::size_t hi,
                                                             std::size_t branch_factor);

MetaChoiceNode restructure_bisect(const HyperparamDomain& domain, std::size_t branch_factor);

/// Presents every raw choice with more than `branch_factor` options as a
/// sequence of range-narrowing decisions. The leaf set is unchanged.
class BisectedTraversal final : public Traversal {
 public:
  BisectedTraversal(std::unique_ptr<Traversal> inner, std::size_t branch_factor);
  BisectedTraversal(const BisectedTraversal& other);

  std::unique_ptr<Traversal> clone() const override { return std::make_unique<BisectedTraversal>(*this); }
  bool done() const override { return inner_->done(); }
  Decision decision() const override;
  void take(std::size_t option) override;
  const Path& path() const override { return inner_->path(); }
  const Module& model() const override { return inner_->model(); }

 private:
  std::unique_ptr<Traversal> inner_;
  std::size_t branch_factor_;
  std::optional<std::pair<std::size_t, std::size_t>> range_;
};

std::unique_ptr<Traversal> wrap_bisected(std::unique_ptr<Traversal> inner, std::size_t branch_factor);

/// Completes `t` choosing uniformly at every decision.
void rollout(Traversal& t, Rng& rng);

/// Uniform rollout from the root. Throws Error(SampleFailed) naming the site
/// whose choice produced an invalid model.
Path sample_uniform(const SpaceExpr& space, const Shape& in_shape, std::uint64_t seed);

struct Enumeration {
  std::vector<Path> paths;
  bool truncated = false;
  /// One entry per pruned subtree: "<site>=<option>: <reason>".
  std::vector<std::string> pruned;
};

/// Depth-first, left-to-right leaves of the tree below `start`.
Enumeration enumerate(const Traversal& start, std::size_t limit);
Enumeration enumerate(const SpaceExpr& space, const Shape& in_shape, std::size_t limit);

/// Leaf count, stopping once it exceeds `cap` (returns cap + 1 then).
std::size_t count_leaves(const Traversal& start, std::size_t cap);

/// Re-specifies a fresh instance along `path`, checking every site id and
/// option value. Throws PathMismatch.
ModuleBox replay(const SpaceExpr& space, const Shape& in_shape, const Path& path);

}  // namespace archspace
