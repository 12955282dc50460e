#include <cctype>
#include <charconv>
#include <cstring>

#include "gridstore/formula.hpp"

namespace gridstore {

ExprPtr makeExpr(decltype(Expr::node) node) { return std::make_shared<const Expr>(Expr{std::move(node)}); }

namespace {

bool isIdentStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool isIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '.';
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool looksLikeA1(std::string_view tok) {
  std::size_t i = 0;
  if (i < tok.size() && tok[i] == '$') ++i;
  const std::size_t l = i;
  while (i < tok.size() && std::isalpha(static_cast<unsigned char>(tok[i]))) ++i;
  if (i == l || i - l > 7) return false;
  if (i < tok.size() && tok[i] == '$') ++i;
  const std::size_t d = i;
  while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
  return i > d && i == tok.size() && tok[d] != '0';
}

// Recursive-descent parser. Offsets reported in errors are 1-based byte
// positions; end of input is reported as size + 1.
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprPtr parse() {
    if (src_.empty() || src_[0] != '=') fail("formula must begin with '='", 0);
    pos_ = 1;
    auto e = comparison();
    skipSpace();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg + " at offset " + std::to_string(at + 1), at + 1);
  }

  void skipSpace() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skipSpace();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(char c) {
    skipSpace();
    if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended", pos_);
    if (src_[pos_] != c) fail(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  ExprPtr comparison() {
    auto lhs = additive();
    static constexpr std::pair<std::string_view, BinaryOp> kOps[] = {
        {"<>", BinaryOp::Ne}, {"<=", BinaryOp::Le}, {">=", BinaryOp::Ge},
        {"<", BinaryOp::Lt},  {">", BinaryOp::Gt},  {"=", BinaryOp::Eq}};
    for (const auto& [tok, op] : kOps) {
      if (accept(tok)) {
        auto rhs = additive();
        return makeExpr(Binary{op, lhs, rhs});
      }
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = term();
    for (;;) {
      if (accept("+")) {
        lhs = makeExpr(Binary{BinaryOp::Add, lhs, term()});
      } else if (accept("-")) {
        lhs = makeExpr(Binary{BinaryOp::Sub, lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  ExprPtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept("*")) {
        lhs = makeExpr(Binary{BinaryOp::Mul, lhs, unary()});
      } else if (accept("/")) {
        lhs = makeExpr(Binary{BinaryOp::Div, lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  ExprPtr unary() {
    if (accept("-")) return makeExpr(Negate{unary()});
    if (accept("+")) return unary();
    return primary();
  }

  ExprPtr primary() {
    skipSpace();
    if (pos_ >= src_.size()) fail("unexpected end of formula", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = comparison();
      expect(')');
      return e;
    }
    if (c == '"') return stringLiteral();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return numberLiteral();
    if (src_.substr(pos_, 5) == "#REF!") {
      pos_ += 5;
      return makeExpr(RefErrorLit{});
    }
    if (isIdentStart(c)) return identifier();
    fail("unexpected '" + std::string(1, c) + "'", pos_);
  }

  ExprPtr stringLiteral() {
    const std::size_t start = pos_++;
    std::string out;
    for (;;) {
      if (pos_ >= src_.size()) fail("unterminated string literal", start);
      const char c = src_[pos_++];
      if (c == '"') {
        if (pos_ < src_.size() && src_[pos_] == '"') {
          out.push_back('"');
          ++pos_;
          continue;
        }
        break;
      }
      out.push_back(c);
    }
    return makeExpr(StringLit{std::move(out)});
  }

  ExprPtr numberLiteral() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0;
    const auto* first = src_.data() + start;
    const auto* last = src_.data() + pos_;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) fail("malformed number", start);
    return makeExpr(NumberLit{v});
  }

  ExprPtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && isIdentChar(src_[pos_])) ++pos_;
    const std::string_view tok = src_.substr(start, pos_ - start);
    const std::string up = upper(tok);

    skipSpace();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      static const std::pair<const char*, Function> kFns[] = {{"SUM", Function::Sum},
                                                              {"AVERAGE", Function::Average},
                                                              {"MIN", Function::Min},
                                                              {"MAX", Function::Max},
                                                              {"COUNT", Function::Count}};
      for (const auto& [name, fn] : kFns) {
        if (up == name) return call(fn);
      }
      fail("unknown function '" + std::string(tok) + "'", start);
    }
    if (up == "TRUE") return makeExpr(BoolLit{true});
    if (up == "FALSE") return makeExpr(BoolLit{false});
    if (looksLikeA1(tok)) {
      const CellAddress a = parseA1(tok);
      if (accept(":")) {
        skipSpace();
        const std::size_t s2 = pos_;
        while (pos_ < src_.size() && isIdentChar(src_[pos_])) ++pos_;
        const std::string_view tok2 = src_.substr(s2, pos_ - s2);
        if (!looksLikeA1(tok2)) fail("expected cell reference after ':'", s2);
        const CellAddress b = parseA1(tok2);
        return makeExpr(RangeRef{Region{std::min(a.row, b.row), std::min(a.col, b.col),
                                        std::max(a.row, b.row), std::max(a.col, b.col)}});
      }
      return makeExpr(CellRef{a});
    }
    return makeExpr(NameRef{std::string(tok)});
  }

  ExprPtr call(Function fn) {
    expect('(');
    std::vector<ExprPtr> args;
    skipSpace();
    if (pos_ < src_.size() && src_[pos_] == ')') {
      ++pos_;
      return makeExpr(Call{fn, std::move(args)});
    }
    for (;;) {
      args.push_back(comparison());
      skipSpace();
      if (pos_ >= src_.size()) fail("expected ')' but input ended", pos_);
      if (src_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (src_[pos_] == ')') {
        ++pos_;
        break;
      }
      fail("expected ',' or ')'", pos_);
    }
    return makeExpr(Call{fn, std::move(args)});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add:
    case BinaryOp::Sub:
      return 2;
    case BinaryOp::Mul:
    case BinaryOp::Div:
      return 3;
    default:
      return 1;
  }
}

std::string_view opText(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

std::string_view fnName(Function f) {
  switch (f) {
    case Function::Sum: return "SUM";
    case Function::Average: return "AVERAGE";
    case Function::Min: return "MIN";
    case Function::Max: return "MAX";
    case Function::Count: return "COUNT";
  }
  return "?";
}

// Precedence of the expression at the top of `e`; atoms bind tightest.
int exprPrecedence(const Expr& e) {
  if (const auto* b = std::get_if<Binary>(&e.node)) return precedence(b->op);
  if (std::holds_alternative<Negate>(e.node)) return 4;
  return 5;
}

void format(const Expr& e, std::string& out);

void formatChild(const Expr& e, int minPrec, std::string& out) {
  if (exprPrecedence(e) < minPrec) {
    out.push_back('(');
    format(e, out);
    out.push_back(')');
  } else {
    format(e, out);
  }
}

void format(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          char buf[64];
          const auto res = std::to_chars(buf, buf + sizeof(buf), n.value);
          out.append(buf, res.ptr);
        } else if constexpr (std::is_same_v<T, StringLit>) {
          out.push_back('"');
          for (char c : n.value) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
          }
          out.push_back('"');
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          out += n.value ? "TRUE" : "FALSE";
        } else if constexpr (std::is_same_v<T, CellRef>) {
          out += formatA1(n.addr);
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          out += formatA1({n.region.top, n.region.left});
          out.push_back(':');
          out += formatA1({n.region.bottom, n.region.right});
        } else if constexpr (std::is_same_v<T, NameRef>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, RefErrorLit>) {
          out += "#REF!";
        } else if constexpr (std::is_same_v<T, Negate>) {
          out.push_back('-');
          formatChild(*n.operand, 4, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const int p = precedence(n.op);
          // Comparisons do not chain, so both sides need strictly tighter binding.
          formatChild(*n.lhs, p == 1 ? 2 : p, out);
          out += opText(n.op);
          formatChild(*n.rhs, p + 1, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          out += fnName(n.fn);
          out.push_back('(');
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out.push_back(',');
            format(*n.args[i], out);
          }
          out.push_back(')');
        }
      },
      e.node);
}

}  // namespace

ExprPtr parseFormula(std::string_view src) { return Parser(src).parse(); }

std::string formatFormula(const Expr& e) {
  std::string out = "=";
  format(e, out);
  return out;
}

bool structurallyEqual(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, CellRef>) {
          return x.addr == y.addr;
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          return x.region == y.region;
        } else if constexpr (std::is_same_v<T, NameRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, RefErrorLit>) {
          return true;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return structurallyEqual(*x.operand, *y.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return x.op == y.op && structurallyEqual(*x.lhs, *y.lhs) && structurallyEqual(*x.rhs, *y.rhs);
        } else {
          if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!structurallyEqual(*x.args[i], *y.args[i])) return false;
          }
          return true;
        }
      },
      a.node);
}

}  // namespace gridstore
