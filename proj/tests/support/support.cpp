#include "support.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace testsupport {

using archspace::ModuleKind;
using archspace::uniform01;
using archspace::uniform_index;

namespace {

std::int64_t pick_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

// Distinct values drawn from `pool`, in pool order.
std::vector<Literal> subset(Rng& rng, const std::vector<Literal>& pool, int max_n) {
  const std::size_t n = 1 + uniform_index(rng, std::min<std::size_t>(pool.size(), static_cast<std::size_t>(max_n)));
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<Literal> out;
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

std::vector<Literal> ints(std::initializer_list<std::int64_t> v) {
  std::vector<Literal> out;
  for (auto x : v) out.emplace_back(x);
  return out;
}

std::vector<Literal> decimals(std::initializer_list<double> v) {
  std::vector<Literal> out;
  for (auto x : v) out.emplace_back(x);
  return out;
}

std::vector<Literal> strings(std::initializer_list<const char*> v) {
  std::vector<Literal> out;
  for (auto x : v) out.emplace_back(std::string(x));
  return out;
}

SpaceExpr leaf(ModuleKind k) {
  SpaceExpr e;
  e.kind = k;
  return e;
}

SpaceExpr basic(Rng& rng, const GenOptions& opt) {
  std::vector<ModuleKind> kinds{ModuleKind::Affine,  ModuleKind::ReLU,       ModuleKind::Dropout,
                                ModuleKind::Empty,   ModuleKind::BatchNormalization,
                                ModuleKind::UserHyperparams};
  if (opt.spatial) {
    kinds.push_back(ModuleKind::Conv2D);
    kinds.push_back(ModuleKind::Conv2D);
    kinds.push_back(ModuleKind::MaxPooling2D);
  }
  SpaceExpr e = leaf(kinds[uniform_index(rng, kinds.size())]);
  const int mv = opt.max_values;
  switch (e.kind) {
    case ModuleKind::Affine:
      e.value_lists.push_back(subset(rng, ints({2, 3, 4, 5, 8, 10}), mv));
      if (opt.exotic_literals && uniform01(rng) < 0.3)
        e.value_lists.push_back(subset(rng, strings({"kaiming", "xavier", "zeros"}), mv));
      break;
    case ModuleKind::Dropout: {
      std::vector<Literal> pool = decimals({0.25, 0.5, 0.75, 0.9, 1.0});
      if (opt.exotic_literals) pool.emplace_back(uniform01(rng) * 0.5 + 0.01);
      e.value_lists.push_back(subset(rng, pool, mv));
      break;
    }
    case ModuleKind::Conv2D: {
      e.value_lists.push_back(subset(rng, ints({4, 8, 16}), mv));
      e.value_lists.push_back(subset(rng, ints({1, 3, 5}), mv));
      e.value_lists.push_back(subset(rng, ints({1, 2}), mv));
      if (uniform01(rng) < 0.5) e.value_lists.push_back(subset(rng, strings({"SAME", "VALID"}), mv));
      if (e.value_lists.size() == 4 && opt.exotic_literals && uniform01(rng) < 0.3)
        e.value_lists.push_back(subset(rng, strings({"kaiming", "xavier"}), mv));
      break;
    }
    case ModuleKind::MaxPooling2D:
      e.value_lists.push_back(subset(rng, ints({2, 3}), mv));
      e.value_lists.push_back(subset(rng, ints({1, 2}), mv));
      if (uniform01(rng) < 0.5) e.value_lists.push_back(subset(rng, strings({"SAME", "VALID"}), mv));
      break;
    case ModuleKind::UserHyperparams: {
      const char* names[] = {"optimizer", "learning_rate", "patience", "batch"};
      const std::size_t n = 1 + uniform_index(rng, 2);
      const std::size_t first = uniform_index(rng, 4);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t which = (first + i) % 4;
        e.names.emplace_back(names[which]);
        if (which == 0) e.value_lists.push_back(subset(rng, strings({"adam", "sgd", "rmsprop"}), mv));
        else if (which == 1) e.value_lists.push_back(subset(rng, decimals({0.1, 0.01, 0.001, 1e-4}), mv));
        else e.value_lists.push_back(subset(rng, ints({4, 8, 16, 32}), mv));
      }
      break;
    }
    default: break;
  }
  return e;
}

SpaceExpr gen(Rng& rng, const GenOptions& opt, int depth) {
  if (depth >= opt.max_depth || uniform01(rng) < 0.35) return basic(rng, opt);
  static const ModuleKind composites[] = {ModuleKind::Concat,   ModuleKind::Or,       ModuleKind::Repeat,
                                          ModuleKind::RepeatTied, ModuleKind::Optional, ModuleKind::Residual,
                                          ModuleKind::MaybeSwap};
  SpaceExpr e = leaf(composites[uniform_index(rng, std::size(composites))]);
  auto child = [&] { return gen(rng, opt, depth + 1); };
  switch (e.kind) {
    case ModuleKind::Concat:
    case ModuleKind::Or: {
      const auto n = pick_int(rng, 1, opt.max_children);
      for (std::int64_t i = 0; i < n; ++i) e.children.push_back(child());
      break;
    }
    case ModuleKind::Repeat:
    case ModuleKind::RepeatTied:
      e.value_lists.push_back(subset(rng, ints({1, 2, 3}), opt.max_values));
      e.children.push_back(child());
      break;
    case ModuleKind::MaybeSwap:
      e.children.push_back(child());
      e.children.push_back(child());
      break;
    default:
      e.children.push_back(child());
      break;
  }
  return e;
}

// Every leaf as a list of decision strings. Throws once there are too many.
struct TooMany {};

using Leaves = std::vector<std::string>;

Leaves product(const Leaves& a, const Leaves& b, std::uint64_t cap) {
  if (static_cast<std::uint64_t>(a.size()) * b.size() > cap) throw TooMany{};
  Leaves out;
  for (const auto& x : a)
    for (const auto& y : b) out.push_back(x + "|" + y);
  return out;
}

Leaves list_leaves(const SpaceExpr& e, const std::string& at, std::uint64_t cap) {
  Leaves own{""};
  for (std::size_t i = 0; i < e.value_lists.size() && e.kind != ModuleKind::Repeat && e.kind != ModuleKind::RepeatTied;
       ++i) {
    Leaves opts;
    for (const auto& v : e.value_lists[i]) opts.push_back(at + ":" + std::to_string(i) + "=" + archspace::format_literal(v));
    own = product(own, opts, cap);
  }
  auto sub = [&](std::size_t i, const std::string& tag) { return list_leaves(e.children[i], at + "/" + tag, cap); };
  switch (e.kind) {
    case ModuleKind::Concat:
    case ModuleKind::Residual: {
      Leaves acc = own;
      for (std::size_t i = 0; i < e.children.size(); ++i) acc = product(acc, sub(i, std::to_string(i)), cap);
      return acc;
    }
    case ModuleKind::Or: {
      Leaves acc;
      for (std::size_t i = 0; i < e.children.size(); ++i)
        for (auto& l : sub(i, std::to_string(i))) {
          acc.push_back("or" + std::to_string(i) + "|" + l);
          if (acc.size() > cap) throw TooMany{};
        }
      return acc;
    }
    case ModuleKind::Optional: {
      Leaves acc{"skip"};
      for (auto& l : sub(0, "0")) acc.push_back("take|" + l);
      if (acc.size() > cap) throw TooMany{};
      return acc;
    }
    case ModuleKind::MaybeSwap: {
      Leaves ab = product(sub(0, "0"), sub(1, "1"), cap);
      Leaves acc;
      for (const char* order : {"ab", "ba"})
        for (const auto& l : ab) acc.push_back(std::string(order) + "|" + l);
      if (acc.size() > cap) throw TooMany{};
      return acc;
    }
    case ModuleKind::Repeat:
    case ModuleKind::RepeatTied: {
      Leaves acc;
      for (const auto& v : e.value_lists[0]) {
        const auto k = std::get<std::int64_t>(v);
        const std::int64_t copies = e.kind == ModuleKind::Repeat ? k : 1;
        Leaves rep{"n=" + std::to_string(k)};
        for (std::int64_t c = 0; c < copies; ++c) rep = product(rep, sub(0, std::to_string(c)), cap);
        for (auto& l : rep) acc.push_back(std::move(l));
        if (acc.size() > cap) throw TooMany{};
      }
      return acc;
    }
    default: return own;
  }
}

}  // namespace

SpaceExpr random_space(Rng& rng, const GenOptions& opt) { return gen(rng, opt, 0); }

SpaceExpr random_bounded_space(Rng& rng, const GenOptions& opt, std::uint64_t max_leaves) {
  for (;;) {
    SpaceExpr e = random_space(rng, opt);
    if (brute_force_leaf_count(e, max_leaves) <= max_leaves) return e;
  }
}

std::uint64_t brute_force_leaf_count(const SpaceExpr& e, std::uint64_t cap) {
  try {
    return list_leaves(e, "", cap).size();
  } catch (const TooMany&) {
    return cap + 1;
  }
}

std::int64_t sliding_window_count(std::int64_t in, std::int64_t kernel, std::int64_t stride, bool same_padding) {
  // SAME: windows start at every stride step inside the input (the padding
  // only fills their tails). VALID: the whole window must fit.
  std::int64_t n = 0;
  for (std::int64_t start = 0; start < in; start += stride) {
    if (!same_padding && start + kernel > in) break;
    ++n;
  }
  return n;
}

std::string fixture_path(const std::string& name) { return std::string(ARCHSPACE_TEST_DATA) + "/" + name; }

std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SpaceExpr small_space() { return archspace::parse(read_fixture("small.arch")); }

archspace::Path reference_path() { return archspace::path_from_json(read_fixture("reference_path.json")); }

}  // namespace testsupport
