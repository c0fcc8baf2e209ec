#include "archspace/module.hpp"

#include <algorithm>

#include "archspace/error.hpp"
#include "archspace/graph.hpp"

namespace archspace {

Module::Module(std::shared_ptr<const SpaceExpr> expr, std::string scope)
    : expr_(std::move(expr)), scope_(std::move(scope)) {}

void Module::initialize(const Shape& in_shape) {
  if (in_shape_) throw Error(ErrorCode::AlreadyInitialized, site("initialize"));
  in_shape_ = in_shape;
  on_initialize();
  settle();
}

const Shape& Module::in_shape() const {
  if (!in_shape_) throw Error(ErrorCode::NotInitialized, scope_);
  return *in_shape_;
}

Choice Module::get_choices() const {
  if (!in_shape_) throw Error(ErrorCode::NotInitialized, scope_);
  if (is_specified()) throw Error(ErrorCode::AlreadySpecified, scope_);
  return current_choice();
}

void Module::choose(std::size_t option_index) {
  Choice c = get_choices();
  if (option_index >= c.options.size())
    throw Error(ErrorCode::IndexOutOfRange, c.site_id + ": option " + std::to_string(option_index) + " of " +
                                                std::to_string(c.options.size()));
  on_choose(option_index);
  settle();
}

// Single-option choices never reach the caller.
void Module::settle() {
  while (!is_specified()) {
    Choice c = current_choice();
    if (c.options.size() != 1) break;
    on_choose(0);
  }
}

Shape Module::get_outdim() const {
  if (!in_shape_ || !is_specified()) throw Error(ErrorCode::NotSpecified, scope_);
  return compute_outdim();
}

std::int64_t Module::param_count() const {
  if (!in_shape_ || !is_specified()) throw Error(ErrorCode::NotSpecified, scope_);
  return compute_params();
}

void Module::compile(GraphBuilder& graph) const {
  if (!in_shape_ || !is_specified()) throw Error(ErrorCode::NotSpecified, scope_);
  emit(graph);
}

std::optional<Literal> Module::assignment(std::string_view name) const {
  for (const auto& [n, v] : assignments_)
    if (n == name) return v;
  return std::nullopt;
}

std::string Module::site(std::string_view name) const {
  std::string out = scope_.empty() ? "/" : scope_;
  out += '.';
  out += to_string(kind());
  out += '.';
  out += name;
  return out;
}

void Module::record(const HyperparamDomain& domain, std::size_t option_index) {
  assignments_.emplace_back(domain.name, domain.values.at(option_index));
}

std::shared_ptr<const SpaceExpr> Module::child_expr(std::size_t i) const {
  return std::shared_ptr<const SpaceExpr>(expr_, &expr_->children.at(i));
}

std::string Module::child_scope(std::size_t i) const { return scope_ + "/" + std::to_string(i); }

std::int64_t window_output(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::string_view padding) {
  if (padding == "VALID") {
    std::int64_t out = in >= kernel ? (in - kernel) / stride + 1 : 0;
    if (out <= 0)
      throw Error(ErrorCode::ShapeUnderflow, "VALID window " + std::to_string(kernel) + " over extent " +
                                                 std::to_string(in));
    return out;
  }
  return (in + stride - 1) / stride;
}

}  // namespace archspace
