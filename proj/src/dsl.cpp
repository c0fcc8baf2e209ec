#include "archspace/dsl.hpp"

#include <array>
#include <charconv>
#include <set>
#include <utility>

namespace archspace {

namespace {

constexpr std::array<std::pair<ModuleKind, std::string_view>, 15> kKindNames{{
    {ModuleKind::Affine, "Affine"},
    {ModuleKind::ReLU, "ReLU"},
    {ModuleKind::Dropout, "Dropout"},
    {ModuleKind::Conv2D, "Conv2D"},
    {ModuleKind::MaxPooling2D, "MaxPooling2D"},
    {ModuleKind::BatchNormalization, "BatchNormalization"},
    {ModuleKind::UserHyperparams, "UserHyperparams"},
    {ModuleKind::Empty, "Empty"},
    {ModuleKind::Concat, "Concat"},
    {ModuleKind::Or, "Or"},
    {ModuleKind::Repeat, "Repeat"},
    {ModuleKind::RepeatTied, "RepeatTied"},
    {ModuleKind::Optional, "Optional"},
    {ModuleKind::Residual, "Residual"},
    {ModuleKind::MaybeSwap, "MaybeSwap"},
}};

enum class Tok { LParen, RParen, LBracket, RBracket, Comma, Ident, Integer, Decimal, String, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  Literal value;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  const Token& peek() {
    if (!lookahead_) lookahead_ = scan();
    return *lookahead_;
  }

  Token next() {
    Token tok = peek();
    lookahead_.reset();
    return tok;
  }

 private:
  char cur() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void advance() {
    if (cur() == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < text_.size()) {
      char c = cur();
      if (c == ';') {
        while (pos_ < text_.size() && cur() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  static bool ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  Token scan() {
    skip_blank();
    Token tok;
    tok.span = {line_, col_, 1};
    if (pos_ >= text_.size()) {
      tok.type = Tok::End;
      return tok;
    }
    const std::size_t start = pos_;
    const char c = cur();
    auto single = [&](Tok t) {
      advance();
      tok.type = t;
      tok.text = std::string(1, c);
      return tok;
    };
    switch (c) {
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case '[': return single(Tok::LBracket);
      case ']': return single(Tok::RBracket);
      case ',': return single(Tok::Comma);
      default: break;
    }
    if (c == '"' || c == '\'') return scan_string(tok, c);
    if (digit(c) || c == '-' || c == '+' || c == '.') return scan_number(tok, start);
    if (ident_start(c)) {
      while (ident_char(cur())) advance();
      tok.type = Tok::Ident;
      tok.text = std::string(text_.substr(start, pos_ - start));
      tok.span.length = static_cast<int>(pos_ - start);
      return tok;
    }
    throw ParseError(ErrorCode::UnexpectedToken, tok.span, std::string("unexpected character '") + c + "'");
  }

  Token scan_string(Token& tok, char quote) {
    advance();
    std::string out;
    while (true) {
      if (pos_ >= text_.size() || cur() == '\n')
        throw ParseError(ErrorCode::UnexpectedToken, tok.span, "unterminated string literal");
      char c = cur();
      if (c == quote) {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        char e = cur();
        if (e == 'n') out.push_back('\n');
        else if (e == 't') out.push_back('\t');
        else out.push_back(e);
        advance();
        continue;
      }
      out.push_back(c);
      advance();
    }
    tok.type = Tok::String;
    tok.text = out;
    tok.value = out;
    tok.span.length = col_ - tok.span.column;
    return tok;
  }

  Token scan_number(Token& tok, std::size_t start) {
    bool decimal = false;
    if (cur() == '-' || cur() == '+') advance();
    while (digit(cur())) advance();
    if (cur() == '.') {
      decimal = true;
      advance();
      while (digit(cur())) advance();
    }
    if (cur() == 'e' || cur() == 'E') {
      decimal = true;
      advance();
      if (cur() == '-' || cur() == '+') advance();
      while (digit(cur())) advance();
    }
    std::string_view lexeme = text_.substr(start, pos_ - start);
    tok.span.length = static_cast<int>(lexeme.size());
    tok.text = std::string(lexeme);
    std::string_view digits = lexeme;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (decimal) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last)
        throw ParseError(ErrorCode::InvalidValue, tok.span, "malformed decimal '" + tok.text + "'");
      tok.type = Tok::Decimal;
      tok.value = v;
    } else {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last)
        throw ParseError(ErrorCode::InvalidValue, tok.span, "malformed integer '" + tok.text + "'");
      tok.type = Tok::Integer;
      tok.value = v;
    }
    return tok;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  std::optional<Token> lookahead_;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) {}

  SpaceExpr parse_root() {
    if (lex_.peek().type == Tok::End)
      throw ParseError(ErrorCode::UnexpectedToken, lex_.peek().span, "empty input");
    SpaceExpr root = parse_form(1);
    const Token& tail = lex_.peek();
    if (tail.type == Tok::RParen || tail.type == Tok::RBracket)
      throw ParseError(ErrorCode::UnbalancedParens, tail.span, "unmatched '" + tail.text + "'");
    if (tail.type != Tok::End)
      throw ParseError(ErrorCode::UnexpectedToken, tail.span, "trailing input after the root form");
    return root;
  }

 private:
  static ModuleKind kind_of(const Token& tok) {
    auto kind = module_kind_from_string(tok.text);
    if (!kind) throw ParseError(ErrorCode::UnknownModuleKind, tok.span, "unknown module '" + tok.text + "'");
    return *kind;
  }

  SpaceExpr parse_form(int depth) {
    if (depth > kMaxNestingDepth)
      throw ParseError(ErrorCode::DepthExceeded, lex_.peek().span,
                       "nesting deeper than " + std::to_string(kMaxNestingDepth));
    Token open = lex_.next();
    SpaceExpr expr;
    expr.span = open.span;
    if (open.type == Tok::Ident) {
      expr.kind = kind_of(open);
      expr.span.length = open.span.length;
      validate_form(expr);
      return expr;
    }
    if (open.type == Tok::RParen || open.type == Tok::RBracket)
      throw ParseError(ErrorCode::UnbalancedParens, open.span, "unmatched '" + open.text + "'");
    if (open.type != Tok::LParen) unexpected(open, "expected '(' or a module name");

    Token head = lex_.next();
    if (head.type == Tok::End) throw ParseError(ErrorCode::UnbalancedParens, open.span, "unclosed '('");
    if (head.type != Tok::Ident) unexpected(head, "expected a module name after '('");
    expr.kind = kind_of(head);

    while (true) {
      const Token& tok = lex_.peek();
      switch (tok.type) {
        case Tok::RParen:
          lex_.next();
          validate_form(expr);
          return expr;
        case Tok::End:
          throw ParseError(ErrorCode::UnbalancedParens, open.span, "unclosed '('");
        case Tok::RBracket:
          throw ParseError(ErrorCode::UnbalancedParens, tok.span, "unmatched ']'");
        case Tok::LParen:
        case Tok::Ident:
          expr.children.push_back(parse_form(depth + 1));
          break;
        case Tok::LBracket:
          if (expr.kind == ModuleKind::UserHyperparams) {
            parse_named(expr);
          } else {
            expr.value_lists.push_back(parse_list());
          }
          break;
        default:
          unexpected(tok, "expected a module form or a value list");
      }
    }
  }

  // '[' literal (',' literal)* ']'
  std::vector<Literal> parse_list() {
    Token open = lex_.next();
    std::vector<Literal> values;
    std::optional<LiteralType> type;
    if (lex_.peek().type == Tok::RBracket) {
      Token close = lex_.next();
      SourceSpan span = open.span;
      span.length = close.span.line == open.span.line ? close.span.column - open.span.column + 1 : 1;
      throw ParseError(ErrorCode::EmptyValueList, span, "value list is empty");
    }
    while (true) {
      Token tok = lex_.next();
      if (tok.type == Tok::End) throw ParseError(ErrorCode::UnbalancedParens, open.span, "unclosed '['");
      if (tok.type == Tok::RParen) throw ParseError(ErrorCode::UnbalancedParens, tok.span, "unmatched ')'");
      if (tok.type != Tok::Integer && tok.type != Tok::Decimal && tok.type != Tok::String)
        unexpected(tok, "expected a literal");
      LiteralType t = literal_type(tok.value);
      if (type && *type != t)
        throw ParseError(ErrorCode::HeterogeneousValueList, tok.span, "value list mixes literal types");
      type = t;
      for (const Literal& seen : values)
        if (seen == tok.value)
          throw ParseError(ErrorCode::InvalidValue, tok.span, "duplicate value " + format_literal(tok.value));
      values.push_back(tok.value);

      Token sep = lex_.next();
      if (sep.type == Tok::RBracket) break;
      if (sep.type == Tok::End) throw ParseError(ErrorCode::UnbalancedParens, open.span, "unclosed '['");
      if (sep.type == Tok::RParen) throw ParseError(ErrorCode::UnbalancedParens, sep.span, "unmatched ')'");
      if (sep.type != Tok::Comma) unexpected(sep, "expected ',' or ']'");
    }
    return values;
  }

  // '[' STRING list ']'
  void parse_named(SpaceExpr& expr) {
    Token open = lex_.next();
    Token name = lex_.next();
    if (name.type == Tok::RBracket) throw ParseError(ErrorCode::EmptyValueList, open.span, "value list is empty");
    if (name.type != Tok::String) unexpected(name, "expected a quoted hyperparameter name");
    for (const std::string& seen : expr.names)
      if (seen == name.text)
        throw ParseError(ErrorCode::InvalidValue, name.span, "duplicate hyperparameter '" + name.text + "'");
    if (lex_.peek().type == Tok::Comma) lex_.next();
    if (lex_.peek().type != Tok::LBracket) unexpected(lex_.peek(), "expected '[' with the values");
    std::vector<Literal> values = parse_list();
    Token close = lex_.next();
    if (close.type == Tok::End) throw ParseError(ErrorCode::UnbalancedParens, open.span, "unclosed '['");
    if (close.type != Tok::RBracket) unexpected(close, "expected ']'");
    expr.names.push_back(name.text);
    expr.value_lists.push_back(std::move(values));
  }

  void validate_form(const SpaceExpr& expr) {
    try {
      validate(expr);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.code(), expr.span, e.what());
    }
  }

  [[noreturn]] static void unexpected(const Token& tok, const std::string& what) {
    if (tok.type == Tok::End) throw ParseError(ErrorCode::UnbalancedParens, tok.span, what + ", got end of input");
    throw ParseError(ErrorCode::UnexpectedToken, tok.span, what + ", got '" + tok.text + "'");
  }

  Lexer lex_;
};

struct Arity {
  int min_lists;
  int max_lists;
  int min_children;
  int max_children;  // -1: unbounded
};

Arity arity_of(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Affine: return {1, 2, 0, 0};
    case ModuleKind::Dropout: return {1, 1, 0, 0};
    case ModuleKind::Conv2D: return {3, 5, 0, 0};
    case ModuleKind::MaxPooling2D: return {2, 3, 0, 0};
    case ModuleKind::UserHyperparams: return {1, -1, 0, 0};
    case ModuleKind::ReLU:
    case ModuleKind::BatchNormalization:
    case ModuleKind::Empty: return {0, 0, 0, 0};
    case ModuleKind::Concat:
    case ModuleKind::Or: return {0, 0, 1, -1};
    case ModuleKind::Repeat:
    case ModuleKind::RepeatTied: return {1, 1, 1, 1};
    case ModuleKind::Optional:
    case ModuleKind::Residual: return {0, 0, 1, 1};
    case ModuleKind::MaybeSwap: return {0, 0, 2, 2};
  }
  return {0, 0, 0, 0};
}

void require_type(const std::vector<Literal>& list, LiteralType type, std::string_view what) {
  for (const Literal& v : list)
    if (literal_type(v) != type)
      throw Error(ErrorCode::InvalidValue, std::string(what) + " expects " +
                                               (type == LiteralType::Integer   ? "integers"
                                                : type == LiteralType::Decimal ? "decimals"
                                                                               : "quoted strings"));
}

void require_positive(const std::vector<Literal>& list, std::string_view what) {
  require_type(list, LiteralType::Integer, what);
  for (const Literal& v : list)
    if (std::get<std::int64_t>(v) < 1) throw Error(ErrorCode::InvalidValue, std::string(what) + " must be >= 1");
}

void require_padding(const std::vector<Literal>& list) {
  require_type(list, LiteralType::String, "padding");
  for (const Literal& v : list) {
    const auto& s = std::get<std::string>(v);
    if (s != "SAME" && s != "VALID") throw Error(ErrorCode::InvalidValue, "padding must be \"SAME\" or \"VALID\"");
  }
}

std::string format_decimal(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string out(buf.data(), ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void print_list(std::string& out, const std::vector<Literal>& list) {
  out.push_back('[');
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ", ";
    out += format_literal(list[i]);
  }
  out.push_back(']');
}

void print_form(std::string& out, const SpaceExpr& expr, bool root) {
  const bool bare = expr.value_lists.empty() && expr.children.empty();
  if (bare && !root) {
    out += to_string(expr.kind);
    return;
  }
  out.push_back('(');
  out += to_string(expr.kind);
  auto lists = [&] {
    for (std::size_t i = 0; i < expr.value_lists.size(); ++i) {
      out.push_back(' ');
      if (expr.kind == ModuleKind::UserHyperparams) {
        out += '[' + quote(expr.names[i]) + ' ';
        print_list(out, expr.value_lists[i]);
        out.push_back(']');
      } else {
        print_list(out, expr.value_lists[i]);
      }
    }
  };
  auto children = [&] {
    for (const SpaceExpr& child : expr.children) {
      out.push_back(' ');
      print_form(out, child, false);
    }
  };
  if (expr.kind == ModuleKind::Repeat || expr.kind == ModuleKind::RepeatTied) {
    children();
    lists();
  } else {
    lists();
    children();
  }
  out.push_back(')');
}

}  // namespace

std::string_view to_string(ModuleKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<ModuleKind> module_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_composite(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Concat:
    case ModuleKind::Or:
    case ModuleKind::Repeat:
    case ModuleKind::RepeatTied:
    case ModuleKind::Optional:
    case ModuleKind::Residual:
    case ModuleKind::MaybeSwap: return true;
    default: return false;
  }
}

LiteralType literal_type(const Literal& value) {
  return static_cast<LiteralType>(value.index());
}

std::string format_literal(const Literal& value) {
  switch (literal_type(value)) {
    case LiteralType::Integer: return std::to_string(std::get<std::int64_t>(value));
    case LiteralType::Decimal: return format_decimal(std::get<double>(value));
    case LiteralType::String: return quote(std::get<std::string>(value));
  }
  return {};
}

void validate(const SpaceExpr& expr) {
  const Arity a = arity_of(expr.kind);
  const int lists = static_cast<int>(expr.value_lists.size());
  const int children = static_cast<int>(expr.children.size());
  const std::string name(to_string(expr.kind));
  if (lists < a.min_lists || (a.max_lists >= 0 && lists > a.max_lists))
    throw Error(ErrorCode::ArityMismatch, name + " takes " + std::to_string(a.min_lists) +
                                              (a.max_lists == a.min_lists ? ""
                                               : a.max_lists < 0          ? " or more"
                                                                          : "-" + std::to_string(a.max_lists)) +
                                              " value lists, got " + std::to_string(lists));
  if (children < a.min_children || (a.max_children >= 0 && children > a.max_children))
    throw Error(ErrorCode::ArityMismatch, name + " takes " + std::to_string(a.min_children) +
                                              (a.max_children == a.min_children ? ""
                                               : a.max_children < 0             ? " or more"
                                                                                : "-" + std::to_string(a.max_children)) +
                                              " submodules, got " + std::to_string(children));
  if (expr.kind == ModuleKind::UserHyperparams) {
    if (expr.names.size() != expr.value_lists.size())
      throw Error(ErrorCode::ArityMismatch, "UserHyperparams needs one name per value list");
    std::set<std::string> seen;
    for (const auto& n : expr.names)
      if (!seen.insert(n).second) throw Error(ErrorCode::InvalidValue, "duplicate hyperparameter '" + n + "'");
  } else if (!expr.names.empty()) {
    throw Error(ErrorCode::ArityMismatch, name + " does not take named value lists");
  }

  for (const auto& list : expr.value_lists) {
    if (list.empty()) throw Error(ErrorCode::EmptyValueList, "value list is empty");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (literal_type(list[i]) != literal_type(list[0]))
        throw Error(ErrorCode::HeterogeneousValueList, "value list mixes literal types");
      for (std::size_t j = 0; j < i; ++j)
        if (list[i] == list[j]) throw Error(ErrorCode::InvalidValue, "duplicate value " + format_literal(list[i]));
    }
  }

  const auto& v = expr.value_lists;
  switch (expr.kind) {
    case ModuleKind::Affine:
      require_positive(v[0], "Affine units");
      if (v.size() > 1) require_type(v[1], LiteralType::String, "Affine initializer");
      break;
    case ModuleKind::Dropout:
      require_type(v[0], LiteralType::Decimal, "Dropout keep probability");
      for (const Literal& p : v[0]) {
        double keep = std::get<double>(p);
        if (!(keep > 0.0 && keep <= 1.0)) throw Error(ErrorCode::InvalidValue, "keep probability must lie in (0, 1]");
      }
      break;
    case ModuleKind::Conv2D:
      require_positive(v[0], "Conv2D filters");
      require_positive(v[1], "Conv2D kernel size");
      require_positive(v[2], "Conv2D stride");
      if (v.size() > 3) require_padding(v[3]);
      if (v.size() > 4) require_type(v[4], LiteralType::String, "Conv2D initializer");
      break;
    case ModuleKind::MaxPooling2D:
      require_positive(v[0], "MaxPooling2D pool size");
      require_positive(v[1], "MaxPooling2D stride");
      if (v.size() > 2) require_padding(v[2]);
      break;
    case ModuleKind::Repeat:
    case ModuleKind::RepeatTied:
      require_positive(v[0], name + " count");
      break;
    default:
      break;
  }
}

SpaceExpr parse(std::string_view text) {
  Parser parser(text);
  return parser.parse_root();
}

std::string pretty_print(const SpaceExpr& expr) {
  std::string out;
  print_form(out, expr, true);
  return out;
}

}  // namespace archspace
