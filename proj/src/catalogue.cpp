// Basic and composite modules shipped with the language.

#include <algorithm>

#include "archspace/error.hpp"
#include "archspace/graph.hpp"
#include "archspace/module.hpp"

namespace archspace {

namespace {

std::int64_t as_int(const Literal& v) { return std::get<std::int64_t>(v); }

std::vector<Literal> index_options(std::size_t n) {
  std::vector<Literal> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(static_cast<std::int64_t>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Basic modules

class BasicModule final : public Module {
 public:
  BasicModule(std::shared_ptr<const SpaceExpr> expr, std::string scope) : Module(std::move(expr), std::move(scope)) {
    const auto& lists = expr_->value_lists;
    auto domain = [&](const char* name, std::size_t i, std::vector<Literal> fallback = {}) {
      if (i < lists.size()) domains_.push_back({name, lists[i]});
      else if (!fallback.empty()) domains_.push_back({name, std::move(fallback)});
    };
    switch (kind()) {
      case ModuleKind::Affine:
        domain("units", 0);
        domain("initializer", 1);
        break;
      case ModuleKind::Dropout:
        domain("keep_prob", 0);
        break;
      case ModuleKind::Conv2D:
        domain("filters", 0);
        domain("kernel_size", 1);
        domain("stride", 2);
        domain("padding", 3, {Literal{std::string("SAME")}});
        domain("initializer", 4);
        break;
      case ModuleKind::MaxPooling2D:
        domain("pool_size", 0);
        domain("stride", 1);
        domain("padding", 2, {Literal{std::string("SAME")}});
        break;
      case ModuleKind::UserHyperparams:
        for (std::size_t i = 0; i < lists.size(); ++i) domains_.push_back({expr_->names[i], lists[i]});
        break;
      default:
        break;
    }
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<BasicModule>(*this); }

  bool is_specified() const override { return assignments_.size() == domains_.size(); }

 protected:
  void on_initialize() override {
    if ((kind() == ModuleKind::Conv2D || kind() == ModuleKind::MaxPooling2D) && in_shape_->order() != 3)
      throw Error(ErrorCode::ShapeIncompatible, site("input") + " needs an order-3 [H,W,C] input, got [" +
                                                    in_shape_->to_string() + "]");
  }

  Choice current_choice() const override {
    const auto& d = domains_[assignments_.size()];
    return {site(d.name), d.values};
  }

  void on_choose(std::size_t i) override { record(domains_[assignments_.size()], i); }

  Shape compute_outdim() const override {
    const Shape& in = *in_shape_;
    switch (kind()) {
      case ModuleKind::Affine:
        return Shape{get_int("units")};
      case ModuleKind::Conv2D: {
        const auto k = get_int("kernel_size");
        const auto s = get_int("stride");
        const auto pad = get_string("padding");
        return Shape{window_output(in[0], k, s, pad), window_output(in[1], k, s, pad), get_int("filters")};
      }
      case ModuleKind::MaxPooling2D: {
        const auto k = get_int("pool_size");
        const auto s = get_int("stride");
        const auto pad = get_string("padding");
        return Shape{window_output(in[0], k, s, pad), window_output(in[1], k, s, pad), in[2]};
      }
      default:
        return in;
    }
  }

  std::int64_t compute_params() const override {
    const Shape& in = *in_shape_;
    switch (kind()) {
      case ModuleKind::Affine:
        return (in.elements() + 1) * get_int("units");
      case ModuleKind::Conv2D: {
        const auto k = get_int("kernel_size");
        const auto f = get_int("filters");
        return k * k * in[2] * f + f;
      }
      case ModuleKind::BatchNormalization:
        return 2 * in.last();
      default:
        return 0;
    }
  }

  void emit(GraphBuilder& g) const override {
    const Shape out = compute_outdim();
    Attrs attrs(assignments_.begin(), assignments_.end());
    switch (kind()) {
      case ModuleKind::Affine:
        if (in_shape_->order() > 1) g.append(NodeOp::Flatten, {}, Shape{in_shape_->elements()}, 0);
        g.append(NodeOp::Affine, std::move(attrs), out, compute_params());
        break;
      case ModuleKind::Conv2D:
        g.append(NodeOp::Conv2D, std::move(attrs), out, compute_params());
        break;
      case ModuleKind::MaxPooling2D:
        g.append(NodeOp::MaxPool2D, std::move(attrs), out, 0);
        break;
      case ModuleKind::Dropout:
        g.append(NodeOp::Dropout, std::move(attrs), out, 0, /*train_only=*/true);
        break;
      case ModuleKind::BatchNormalization:
        g.append(NodeOp::BatchNorm, {}, out, compute_params());
        break;
      case ModuleKind::ReLU:
        g.append(NodeOp::ReLU, {}, out, 0);
        break;
      case ModuleKind::Empty:
        g.append(NodeOp::Identity, {}, out, 0);
        break;
      case ModuleKind::UserHyperparams:
        for (const auto& [name, value] : assignments_) g.set_training(name, value);
        break;
      default:
        break;
    }
  }

 private:
  std::int64_t get_int(std::string_view name) const { return as_int(*assignment(name)); }
  std::string get_string(std::string_view name) const { return std::get<std::string>(*assignment(name)); }
};

// ---------------------------------------------------------------------------
// Series helper shared by Concat, MaybeSwap and Repeat. Part i+1 is
// initialized with the output of part i as soon as part i is specified.

struct Chain {
  std::vector<ModuleBox> parts;
  std::size_t active = 0;

  void start(const Shape& in) {
    if (parts.empty()) return;
    parts[0]->initialize(in);
    advance();
  }

  void advance() {
    while (active < parts.size() && parts[active]->is_specified()) {
      Shape out = parts[active]->get_outdim();
      if (++active < parts.size()) parts[active]->initialize(out);
    }
  }

  bool done() const { return active == parts.size(); }
  Choice choice() const { return parts[active]->get_choices(); }

  void choose(std::size_t i) {
    parts[active]->choose(i);
    advance();
  }

  Shape outdim(const Shape& in) const { return parts.empty() ? in : parts.back()->get_outdim(); }

  std::int64_t params() const {
    std::int64_t total = 0;
    for (const auto& p : parts) total += p->param_count();
    return total;
  }

  void emit(GraphBuilder& g) const {
    for (const auto& p : parts) p->compile(g);
  }

  std::vector<const Module*> view() const {
    std::vector<const Module*> out;
    for (const auto& p : parts) out.push_back(p.get());
    return out;
  }
};

class ConcatModule final : public Module {
 public:
  ConcatModule(std::shared_ptr<const SpaceExpr> expr, std::string scope) : Module(std::move(expr), std::move(scope)) {
    for (std::size_t i = 0; i < expr_->children.size(); ++i)
      chain_.parts.push_back(instantiate(child_expr(i), child_scope(i)));
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<ConcatModule>(*this); }
  bool is_specified() const override { return in_shape_ && chain_.done(); }
  std::vector<const Module*> submodules() const override { return chain_.view(); }

 protected:
  void on_initialize() override { chain_.start(*in_shape_); }
  Choice current_choice() const override { return chain_.choice(); }
  void on_choose(std::size_t i) override { chain_.choose(i); }
  Shape compute_outdim() const override { return chain_.outdim(*in_shape_); }
  std::int64_t compute_params() const override { return chain_.params(); }
  void emit(GraphBuilder& g) const override { chain_.emit(g); }

 private:
  Chain chain_;
};

// Structural hyperparameter first, then the selected alternative.
class OrModule final : public Module {
 public:
  OrModule(std::shared_ptr<const SpaceExpr> expr, std::string scope) : Module(std::move(expr), std::move(scope)) {
    for (std::size_t i = 0; i < expr_->children.size(); ++i)
      children_.push_back(instantiate(child_expr(i), child_scope(i)));
    domains_.push_back({"which", index_options(children_.size())});
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<OrModule>(*this); }
  bool is_specified() const override { return which_ && children_[*which_]->is_specified(); }

  std::vector<const Module*> submodules() const override {
    std::vector<const Module*> out;
    for (const auto& c : children_) out.push_back(c.get());
    return out;
  }

 protected:
  void on_initialize() override {}

  Choice current_choice() const override {
    if (!which_) return {site("which"), domains_[0].values};
    return children_[*which_]->get_choices();
  }

  void on_choose(std::size_t i) override {
    if (!which_) {
      record(domains_[0], i);
      which_ = i;
      children_[i]->initialize(*in_shape_);
      return;
    }
    children_[*which_]->choose(i);
  }

  Shape compute_outdim() const override { return children_[*which_]->get_outdim(); }
  std::int64_t compute_params() const override { return children_[*which_]->param_count(); }
  void emit(GraphBuilder& g) const override { children_[*which_]->compile(g); }

 private:
  std::vector<ModuleBox> children_;
  std::optional<std::size_t> which_;
};

class OptionalModule final : public Module {
 public:
  OptionalModule(std::shared_ptr<const SpaceExpr> expr, std::string scope)
      : Module(std::move(expr), std::move(scope)), child_(instantiate(child_expr(0), child_scope(0))) {
    domains_.push_back({"include", {Literal{std::string("exclude")}, Literal{std::string("include")}}});
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<OptionalModule>(*this); }
  bool is_specified() const override { return include_ && (!*include_ || child_->is_specified()); }
  std::vector<const Module*> submodules() const override { return {child_.get()}; }

 protected:
  void on_initialize() override {}

  Choice current_choice() const override {
    if (!include_) return {site("include"), domains_[0].values};
    return child_->get_choices();
  }

  void on_choose(std::size_t i) override {
    if (!include_) {
      record(domains_[0], i);
      include_ = (i == 1);
      if (*include_) child_->initialize(*in_shape_);
      return;
    }
    child_->choose(i);
  }

  Shape compute_outdim() const override { return *include_ ? child_->get_outdim() : *in_shape_; }
  std::int64_t compute_params() const override { return *include_ ? child_->param_count() : 0; }
  void emit(GraphBuilder& g) const override {
    if (*include_) child_->compile(g);
  }

 private:
  ModuleBox child_;
  std::optional<bool> include_;
};

class MaybeSwapModule final : public Module {
 public:
  MaybeSwapModule(std::shared_ptr<const SpaceExpr> expr, std::string scope)
      : Module(std::move(expr), std::move(scope)) {
    pending_.push_back(instantiate(child_expr(0), child_scope(0)));
    pending_.push_back(instantiate(child_expr(1), child_scope(1)));
    domains_.push_back({"order", {Literal{std::string("first-second")}, Literal{std::string("second-first")}}});
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<MaybeSwapModule>(*this); }
  bool is_specified() const override { return ordered_ && chain_.done(); }

  std::vector<const Module*> submodules() const override {
    if (ordered_) return chain_.view();
    return {pending_[0].get(), pending_[1].get()};
  }

 protected:
  void on_initialize() override {}

  Choice current_choice() const override {
    if (!ordered_) return {site("order"), domains_[0].values};
    return chain_.choice();
  }

  void on_choose(std::size_t i) override {
    if (!ordered_) {
      record(domains_[0], i);
      ordered_ = true;
      if (i == 1) std::swap(pending_[0], pending_[1]);
      chain_.parts = std::move(pending_);
      pending_.clear();
      chain_.start(*in_shape_);
      return;
    }
    chain_.choose(i);
  }

  Shape compute_outdim() const override { return chain_.outdim(*in_shape_); }
  std::int64_t compute_params() const override { return chain_.params(); }
  void emit(GraphBuilder& g) const override { chain_.emit(g); }

 private:
  std::vector<ModuleBox> pending_;
  Chain chain_;
  bool ordered_ = false;
};

// Each repetition is an independent copy of the template.
class RepeatModule final : public Module {
 public:
  RepeatModule(std::shared_ptr<const SpaceExpr> expr, std::string scope) : Module(std::move(expr), std::move(scope)) {
    domains_.push_back({"count", expr_->value_lists[0]});
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<RepeatModule>(*this); }
  bool is_specified() const override { return counted_ && chain_.done(); }
  std::vector<const Module*> submodules() const override { return chain_.view(); }

 protected:
  void on_initialize() override {}

  Choice current_choice() const override {
    if (!counted_) return {site("count"), domains_[0].values};
    return chain_.choice();
  }

  void on_choose(std::size_t i) override {
    if (!counted_) {
      record(domains_[0], i);
      counted_ = true;
      const auto k = static_cast<std::size_t>(as_int(domains_[0].values[i]));
      for (std::size_t r = 0; r < k; ++r) chain_.parts.push_back(instantiate(child_expr(0), child_scope(r)));
      chain_.start(*in_shape_);
      return;
    }
    chain_.choose(i);
  }

  Shape compute_outdim() const override { return chain_.outdim(*in_shape_); }
  std::int64_t compute_params() const override { return chain_.params(); }
  void emit(GraphBuilder& g) const override { chain_.emit(g); }

 private:
  Chain chain_;
  bool counted_ = false;
};

// The first repetition is specified through choices; the remaining ones
// replay the same option sequence on their own input shapes.
class RepeatTiedModule final : public Module {
 public:
  RepeatTiedModule(std::shared_ptr<const SpaceExpr> expr, std::string scope)
      : Module(std::move(expr), std::move(scope)) {
    domains_.push_back({"count", expr_->value_lists[0]});
  }

  std::unique_ptr<Module> clone() const override { return std::make_unique<RepeatTiedModule>(*this); }
  bool is_specified() const override { return count_ && copies_.size() == *count_ && copies_.back()->is_specified(); }

  std::vector<const Module*> submodules() const override {
    std::vector<const Module*> out;
    for (const auto& c : copies_) out.push_back(c.get());
    return out;
  }

 protected:
  void on_initialize() override {}

  Choice current_choice() const override {
    if (!count_) return {site("count"), domains_[0].values};
    return copies_[0]->get_choices();
  }

  void on_choose(std::size_t i) override {
    if (!count_) {
      record(domains_[0], i);
      count_ = static_cast<std::size_t>(as_int(domains_[0].values[i]));
      copies_.push_back(instantiate(child_expr(0), child_scope(0)));
      copies_[0]->initialize(*in_shape_);
    } else {
      log_.push_back(i);
      copies_[0]->choose(i);
    }
    if (copies_[0]->is_specified()) replicate();
  }

  Shape compute_outdim() const override { return copies_.back()->get_outdim(); }

  std::int64_t compute_params() const override {
    std::int64_t total = 0;
    for (const auto& c : copies_) total += c->param_count();
    return total;
  }

  void emit(GraphBuilder& g) const override {
    for (const auto& c : copies_) c->compile(g);
  }

 private:
  void replicate() {
    while (copies_.size() < *count_) {
      Shape in = copies_.back()->get_outdim();
      ModuleBox copy = instantiate(child_expr(0), child_scope(copies_.size()));
      copy->initialize(in);
      for (std::size_t idx : log_) copy->choose(idx);
      copies_.push_back(std::move(copy));
    }
  }

  std::vector<ModuleBox> copies_;
  std::vector<std::size_t> log_;
  std::optional<std::size_t> count_;
};

// Skip connection: output = pad(input) + pad(body(input)), padding every
// dimension at the high end up to the larger of the two.
class ResidualModule final : public Module {
 public:
  ResidualModule(std::shared_ptr<const SpaceExpr> expr, std::string scope)
      : Module(std::move(expr), std::move(scope)), body_(instantiate(child_expr(0), child_scope(0))) {}

  std::unique_ptr<Module> clone() const override { return std::make_unique<ResidualModule>(*this); }
  bool is_specified() const override { return in_shape_ && body_->is_specified(); }
  std::vector<const Module*> submodules() const override { return {body_.get()}; }

 protected:
  void on_initialize() override { body_->initialize(*in_shape_); }
  Choice current_choice() const override { return body_->get_choices(); }
  void on_choose(std::size_t i) override { body_->choose(i); }

  Shape compute_outdim() const override {
    const Shape& skip = *in_shape_;
    const Shape body = body_->get_outdim();
    if (skip.order() != body.order())
      throw Error(ErrorCode::ShapeIncompatible, site("merge") + ": cannot add [" + skip.to_string() + "] and [" +
                                                    body.to_string() + "]");
    std::vector<std::int64_t> dims(skip.order());
    for (std::size_t d = 0; d < dims.size(); ++d) dims[d] = std::max(skip[d], body[d]);
    return Shape(std::move(dims));
  }

  std::int64_t compute_params() const override { return body_->param_count(); }

  void emit(GraphBuilder& g) const override {
    const Shape target = compute_outdim();
    int skip = g.materialize();
    const Shape skip_shape = g.shape();
    body_->compile(g);
    int body = g.materialize();
    const Shape body_shape = g.shape();
    if (skip_shape != target) skip = g.add(NodeOp::PadZeros, {}, skip_shape, target, 0, {skip});
    if (body_shape != target) body = g.add(NodeOp::PadZeros, {}, body_shape, target, 0, {body});
    g.move_to(g.add(NodeOp::Add, {}, target, target, 0, {skip, body}));
  }

 private:
  ModuleBox body_;
};

}  // namespace

ModuleBox instantiate(std::shared_ptr<const SpaceExpr> expr, std::string scope) {
  switch (expr->kind) {
    case ModuleKind::Concat: return ModuleBox(std::make_unique<ConcatModule>(std::move(expr), std::move(scope)));
    case ModuleKind::Or: return ModuleBox(std::make_unique<OrModule>(std::move(expr), std::move(scope)));
    case ModuleKind::Optional: return ModuleBox(std::make_unique<OptionalModule>(std::move(expr), std::move(scope)));
    case ModuleKind::MaybeSwap:
      return ModuleBox(std::make_unique<MaybeSwapModule>(std::move(expr), std::move(scope)));
    case ModuleKind::Repeat: return ModuleBox(std::make_unique<RepeatModule>(std::move(expr), std::move(scope)));
    case ModuleKind::RepeatTied:
      return ModuleBox(std::make_unique<RepeatTiedModule>(std::move(expr), std::move(scope)));
    case ModuleKind::Residual: return ModuleBox(std::make_unique<ResidualModule>(std::move(expr), std::move(scope)));
    default: return ModuleBox(std::make_unique<BasicModule>(std::move(expr), std::move(scope)));
  }
}

ModuleBox instantiate(const SpaceExpr& expr) {
  return instantiate(std::make_shared<const SpaceExpr>(expr), std::string());
}

}  // namespace archspace
