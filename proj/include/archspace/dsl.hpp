#pragma once

// Textual search-space language.
//
//   space   := form
//   form    := '(' KIND item* ')' | KIND
//   item    := form | list | named
//   list    := '[' literal (',' literal)* ']'
//   named   := '[' STRING list ']'            ; UserHyperparams only
//   literal := INTEGER | DECIMAL | STRING
//
// A bare KIND is shorthand for a form without items, so the nested
// `(MaybeSwap BatchNormalization ReLU)` reads the same as
// `(MaybeSwap (BatchNormalization) (ReLU))`. `;` starts a comment that runs
// to the end of the line.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "archspace/error.hpp"

namespace archspace {

enum class ModuleKind {
  // basic
  Affine,
  ReLU,
  Dropout,
  Conv2D,
  MaxPooling2D,
  BatchNormalization,
  UserHyperparams,
  Empty,
  // composite
  Concat,
  Or,
  Repeat,
  RepeatTied,
  Optional,
  Residual,
  MaybeSwap,
};

std::string_view to_string(ModuleKind kind);
std::optional<ModuleKind> module_kind_from_string(std::string_view name);
bool is_composite(ModuleKind kind);

/// A literal hyperparameter value: integer, decimal or quoted string.
using Literal = std::variant<std::int64_t, double, std::string>;

enum class LiteralType { Integer, Decimal, String };

LiteralType literal_type(const Literal& value);

/// Renders a literal in source form: integers plain, decimals with the
/// shortest round-trip digits (always containing '.' or an exponent),
/// strings double-quoted.
std::string format_literal(const Literal& value);

/// Parsed search-space declaration.
struct SpaceExpr {
  ModuleKind kind = ModuleKind::Empty;
  std::vector<std::vector<Literal>> value_lists;
  /// Parallel to value_lists for UserHyperparams; empty for every other kind.
  std::vector<std::string> names;
  std::vector<SpaceExpr> children;
  /// Location of the opening token; not part of structural equality.
  SourceSpan span;

  friend bool operator==(const SpaceExpr& a, const SpaceExpr& b) {
    return a.kind == b.kind && a.value_lists == b.value_lists && a.names == b.names &&
           a.children == b.children;
  }
};

inline constexpr int kMaxNestingDepth = 256;

/// Parses a complete space declaration. Throws ParseError.
SpaceExpr parse(std::string_view text);

/// Canonical text: single spaces between items, ", " inside lists, zero-item
/// children written bare.
std::string pretty_print(const SpaceExpr& expr);

/// Checks per-kind arity and value constraints. parse() runs this on every
/// form; exposed for ASTs built in code.
void validate(const SpaceExpr& expr);

}  // namespace archspace
