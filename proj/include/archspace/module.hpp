#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "archspace/dsl.hpp"
#include "archspace/shape.hpp"

namespace archspace {

class GraphBuilder;

/// Named scalar domain; value order is the natural order used by bisection.
struct HyperparamDomain {
  std::string name;
  std::vector<Literal> values;
};

/// The decision a module is currently waiting on.
struct Choice {
  std::string site_id;
  std::vector<Literal> options;
};

using Assignment = std::pair<std::string, Literal>;

/// A live, sequentially specifiable computational module.
///
/// Lifecycle: initialize() with the input shape, then alternate get_choices()
/// and choose() until is_specified(). Choices with a single option are taken
/// internally and never surfaced. get_outdim(), param_count() and compile()
/// require a fully specified module.
///
/// Site ids have the form "<scope>.<Kind>.<name>" where scope is the slash
/// separated list of submodule indices from the root ("/" for the root).
class Module {
 public:
  virtual ~Module() = default;
  virtual std::unique_ptr<Module> clone() const = 0;

  ModuleKind kind() const noexcept { return expr_->kind; }
  const std::string& scope() const noexcept { return scope_; }
  const SpaceExpr& expr() const noexcept { return *expr_; }

  void initialize(const Shape& in_shape);
  bool is_initialized() const noexcept { return in_shape_.has_value(); }
  const Shape& in_shape() const;

  virtual bool is_specified() const = 0;
  Choice get_choices() const;
  void choose(std::size_t option_index);

  Shape get_outdim() const;
  std::int64_t param_count() const;
  void compile(GraphBuilder& graph) const;

  const std::vector<HyperparamDomain>& local_domains() const noexcept { return domains_; }
  const std::vector<Assignment>& assignments() const noexcept { return assignments_; }
  std::optional<Literal> assignment(std::string_view name) const;
  /// Instantiated submodules (for Or: every alternative, initialized or not).
  virtual std::vector<const Module*> submodules() const { return {}; }

 protected:
  Module(std::shared_ptr<const SpaceExpr> expr, std::string scope);
  Module(const Module&) = default;
  Module& operator=(const Module&) = default;

  virtual void on_initialize() = 0;
  virtual Choice current_choice() const = 0;
  virtual void on_choose(std::size_t option_index) = 0;
  virtual Shape compute_outdim() const = 0;
  virtual std::int64_t compute_params() const = 0;
  virtual void emit(GraphBuilder& graph) const = 0;

  std::string site(std::string_view name) const;
  void record(const HyperparamDomain& domain, std::size_t option_index);
  std::shared_ptr<const SpaceExpr> child_expr(std::size_t i) const;
  std::string child_scope(std::size_t i) const;

  std::shared_ptr<const SpaceExpr> expr_;
  std::string scope_;
  std::optional<Shape> in_shape_;
  std::vector<HyperparamDomain> domains_;
  std::vector<Assignment> assignments_;

 private:
  void settle();
};

/// Owning pointer with value semantics: copying deep-clones the module tree.
class ModuleBox {
 public:
  ModuleBox() = default;
  explicit ModuleBox(std::unique_ptr<Module> m) : ptr_(std::move(m)) {}
  ModuleBox(const ModuleBox& other) : ptr_(other.ptr_ ? other.ptr_->clone() : nullptr) {}
  ModuleBox(ModuleBox&&) noexcept = default;
  ModuleBox& operator=(const ModuleBox& other) {
    if (this != &other) ptr_ = other.ptr_ ? other.ptr_->clone() : nullptr;
    return *this;
  }
  ModuleBox& operator=(ModuleBox&&) noexcept = default;

  Module* operator->() const noexcept { return ptr_.get(); }
  Module& operator*() const noexcept { return *ptr_; }
  Module* get() const noexcept { return ptr_.get(); }
  explicit operator bool() const noexcept { return static_cast<bool>(ptr_); }

 private:
  std::unique_ptr<Module> ptr_;
};

/// Builds an unspecified, uninitialized module tree for a parsed space.
ModuleBox instantiate(const SpaceExpr& expr);
ModuleBox instantiate(std::shared_ptr<const SpaceExpr> expr, std::string scope);

/// Output spatial extent for a sliding window ("SAME" or "VALID").
/// Throws ShapeUnderflow when VALID leaves nothing.
std::int64_t window_output(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::string_view padding);

}  // namespace archspace
