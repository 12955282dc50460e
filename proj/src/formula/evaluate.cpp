#include <charconv>
#include <cmath>
#include <limits>

#include "gridstore/formula.hpp"

namespace gridstore {

std::string_view errorText(ErrorCode c) {
  switch (c) {
    case ErrorCode::DivZero: return "#DIV/0!";
    case ErrorCode::Ref: return "#REF!";
    case ErrorCode::Value: return "#VALUE!";
    case ErrorCode::Name: return "#NAME?";
    case ErrorCode::Cycle: return "#CYCLE!";
  }
  return "#ERROR!";
}

std::string displayString(const Value& v) {
  struct Visitor {
    std::string operator()(const Empty&) const { return ""; }
    std::string operator()(double d) const {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof(buf), d);
      return std::string(buf, res.ptr);
    }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
    std::string operator()(const FormulaError& e) const { return std::string(errorText(e.code)); }
  };
  return std::visit(Visitor{}, v);
}

bool sameValue(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

Value toValue(const CellContent& c) {
  struct Visitor {
    Value operator()(const Empty&) const { return Empty{}; }
    Value operator()(double d) const { return d; }
    Value operator()(const std::string& s) const { return s; }
    Value operator()(bool b) const { return b; }
    Value operator()(const Formula&) const { return FormulaError{ErrorCode::Value}; }
  };
  return std::visit(Visitor{}, c);
}

void CellReader::forEachValue(const Region& r,
                              const std::function<void(CellAddress, const Value&)>& fn) const {
  for (Index row = r.top; row <= r.bottom; ++row) {
    for (Index col = r.left; col <= r.right; ++col) {
      Value v = value({row, col});
      if (!std::holds_alternative<Empty>(v)) fn({row, col}, v);
    }
  }
}

Value SheetReader::value(CellAddress a) const {
  const CellContent& c = sheet_.get(a);
  if (const auto* f = std::get_if<Formula>(&c)) {
    if (auto it = memo_.find(a); it != memo_.end()) return it->second;
    Value v = evaluate(*f->expr, *this);
    memo_[a] = v;
    return v;
  }
  return toValue(c);
}

namespace {

template <typename Fn>
void forEachCellIn(const Sheet::CellMap& cells, const Region& r, Fn&& fn) {
  auto it = cells.lower_bound({r.top, r.left});
  while (it != cells.end() && it->first.row <= r.bottom) {
    const auto [row, col] = it->first;
    if (col < r.left) {
      it = cells.lower_bound({row, r.left});
    } else if (col > r.right) {
      it = cells.lower_bound({row + 1, r.left});
    } else {
      fn(it->first, it->second);
      ++it;
    }
  }
}

}  // namespace

void SheetReader::forEachValue(const Region& r,
                               const std::function<void(CellAddress, const Value&)>& fn) const {
  forEachCellIn(sheet_.cells(), r, [&](CellAddress a, const CellContent&) { fn(a, value(a)); });
}

Value CachedSheetReader::value(CellAddress a) const {
  const CellContent& c = sheet_.get(a);
  if (std::holds_alternative<Formula>(c)) {
    const auto it = values_.find(a);
    return it == values_.end() ? Value{Empty{}} : it->second;
  }
  return toValue(c);
}

void CachedSheetReader::forEachValue(const Region& r,
                                     const std::function<void(CellAddress, const Value&)>& fn) const {
  forEachCellIn(sheet_.cells(), r, [&](CellAddress a, const CellContent&) {
    Value v = value(a);
    if (!std::holds_alternative<Empty>(v)) fn(a, v);
  });
}

namespace {

bool isError(const Value& v) { return std::holds_alternative<FormulaError>(v); }

// Numeric coercion for arithmetic operands.
Value toNumber(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (std::holds_alternative<Empty>(v)) return 0.0;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (const auto* s = std::get_if<std::string>(&v)) {
    double out = 0;
    const auto res = std::from_chars(s->data(), s->data() + s->size(), out);
    if (res.ec == std::errc{} && res.ptr == s->data() + s->size() && !s->empty()) return out;
    return FormulaError{ErrorCode::Value};
  }
  return v;
}

// Type rank used when comparing values of different kinds.
int typeRank(const Value& v) {
  if (std::holds_alternative<double>(v) || std::holds_alternative<Empty>(v)) return 0;
  if (std::holds_alternative<std::string>(v)) return 1;
  return 2;
}

Value compare(BinaryOp op, const Value& a, const Value& b) {
  int cmp = 0;
  const int ra = typeRank(a);
  const int rb = typeRank(b);
  if (ra != rb) {
    cmp = ra < rb ? -1 : 1;
  } else if (ra == 0) {
    const double x = std::get<double>(toNumber(a));
    const double y = std::get<double>(toNumber(b));
    cmp = x < y ? -1 : (x > y ? 1 : 0);
  } else if (ra == 1) {
    const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
  } else {
    const bool x = std::get<bool>(a);
    const bool y = std::get<bool>(b);
    cmp = x == y ? 0 : (x ? 1 : -1);
  }
  switch (op) {
    case BinaryOp::Eq: return cmp == 0;
    case BinaryOp::Ne: return cmp != 0;
    case BinaryOp::Lt: return cmp < 0;
    case BinaryOp::Le: return cmp <= 0;
    case BinaryOp::Gt: return cmp > 0;
    default: return cmp >= 0;
  }
}

bool beyondExtents(const Region& r, const CellReader& reader) {
  return r.bottom > reader.rowExtent() || r.right > reader.colExtent();
}

struct Aggregate {
  double sum = 0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  Index count = 0;
  std::optional<FormulaError> error;

  void add(double v) {
    sum += v;
    min = std::min(min, v);
    max = std::max(max, v);
    ++count;
  }
};

class Evaluator {
 public:
  Evaluator(const CellReader& reader, const std::function<Value(const std::string&)>& names)
      : reader_(reader), names_(names) {}

  Value eval(const Expr& e) {
    return std::visit([&](const auto& n) { return evalNode(n); }, e.node);
  }

 private:
  Value evalNode(const NumberLit& n) { return n.value; }
  Value evalNode(const StringLit& n) { return n.value; }
  Value evalNode(const BoolLit& n) { return n.value; }
  Value evalNode(const RefErrorLit&) { return FormulaError{ErrorCode::Ref}; }
  Value evalNode(const CellRef& n) {
    if (beyondExtents(Region::cell(n.addr), reader_)) return FormulaError{ErrorCode::Ref};
    return reader_.value(n.addr);
  }
  Value evalNode(const RangeRef&) { return FormulaError{ErrorCode::Value}; }
  Value evalNode(const NameRef& n) {
    if (!names_) return FormulaError{ErrorCode::Name};
    return names_(n.name);
  }
  Value evalNode(const Negate& n) {
    Value v = toNumber(eval(*n.operand));
    if (isError(v)) return v;
    return -std::get<double>(v);
  }
  Value evalNode(const Binary& n) {
    Value a = eval(*n.lhs);
    if (isError(a)) return a;
    Value b = eval(*n.rhs);
    if (isError(b)) return b;
    if (precedenceIsComparison(n.op)) return compare(n.op, a, b);
    a = toNumber(a);
    if (isError(a)) return a;
    b = toNumber(b);
    if (isError(b)) return b;
    const double x = std::get<double>(a);
    const double y = std::get<double>(b);
    switch (n.op) {
      case BinaryOp::Add: return x + y;
      case BinaryOp::Sub: return x - y;
      case BinaryOp::Mul: return x * y;
      default:
        if (y == 0) return FormulaError{ErrorCode::DivZero};
        return x / y;
    }
  }
  Value evalNode(const Call& n) {
    Aggregate agg;
    for (const auto& arg : n.args) {
      if (const auto* range = std::get_if<RangeRef>(&arg->node)) {
        if (beyondExtents(range->region, reader_)) return FormulaError{ErrorCode::Ref};
        reader_.forEachValue(range->region, [&](CellAddress, const Value& v) {
          if (const auto* d = std::get_if<double>(&v)) {
            agg.add(*d);
          } else if (const auto* e = std::get_if<FormulaError>(&v)) {
            if (!agg.error) agg.error = *e;
          }
        });
        continue;
      }
      Value v = eval(*arg);
      if (n.fn == Function::Count) {
        if (std::holds_alternative<double>(v)) agg.add(std::get<double>(v));
        continue;
      }
      if (std::holds_alternative<Empty>(v)) continue;
      v = toNumber(v);
      if (isError(v)) return v;
      agg.add(std::get<double>(v));
    }
    if (n.fn == Function::Count) return static_cast<double>(agg.count);
    if (agg.error) return *agg.error;
    switch (n.fn) {
      case Function::Sum: return agg.sum;
      case Function::Average:
        if (agg.count == 0) return FormulaError{ErrorCode::DivZero};
        return agg.sum / static_cast<double>(agg.count);
      case Function::Min: return agg.count ? agg.min : 0.0;
      case Function::Max: return agg.count ? agg.max : 0.0;
      default: return static_cast<double>(agg.count);
    }
  }

  static bool precedenceIsComparison(BinaryOp op) {
    return op != BinaryOp::Add && op != BinaryOp::Sub && op != BinaryOp::Mul && op != BinaryOp::Div;
  }

  const CellReader& reader_;
  const std::function<Value(const std::string&)>& names_;
};

void collectRefs(const Expr& e, std::vector<Region>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CellRef>) {
          out.push_back(Region::cell(n.addr));
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          out.push_back(n.region);
        } else if constexpr (std::is_same_v<T, Negate>) {
          collectRefs(*n.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collectRefs(*n.lhs, out);
          collectRefs(*n.rhs, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) collectRefs(*a, out);
        }
      },
      e.node);
}

// Rewrites every reference with `fn`, which returns nullopt for an
// invalidated reference. Unchanged subtrees are shared.
template <typename Fn>
ExprPtr rewrite(const ExprPtr& e, Fn&& fn) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, CellRef>) {
          const auto r = fn(Region::cell(n.addr));
          if (!r) return makeExpr(RefErrorLit{});
          if (*r == Region::cell(n.addr)) return e;
          return makeExpr(CellRef{{r->top, r->left}});
        } else if constexpr (std::is_same_v<T, RangeRef>) {
          const auto r = fn(n.region);
          if (!r) return makeExpr(RefErrorLit{});
          if (*r == n.region) return e;
          return makeExpr(RangeRef{*r});
        } else if constexpr (std::is_same_v<T, Negate>) {
          auto o = rewrite(n.operand, fn);
          return o == n.operand ? e : makeExpr(Negate{o});
        } else if constexpr (std::is_same_v<T, Binary>) {
          auto l = rewrite(n.lhs, fn);
          auto r = rewrite(n.rhs, fn);
          return (l == n.lhs && r == n.rhs) ? e : makeExpr(Binary{n.op, l, r});
        } else if constexpr (std::is_same_v<T, Call>) {
          std::vector<ExprPtr> args;
          bool changed = false;
          for (const auto& a : n.args) {
            args.push_back(rewrite(a, fn));
            changed |= args.back() != a;
          }
          return changed ? makeExpr(Call{n.fn, std::move(args)}) : e;
        } else {
          return e;
        }
      },
      e->node);
}

std::optional<Region> insertShift(Region r, bool rows, Index after, Index count) {
  Index& lo = rows ? r.top : r.left;
  Index& hi = rows ? r.bottom : r.right;
  if (lo > after) lo += count;
  if (hi > after) hi += count;
  return r;
}

std::optional<Region> deleteShift(Region r, bool rows, Index at) {
  Index& lo = rows ? r.top : r.left;
  Index& hi = rows ? r.bottom : r.right;
  if (lo == at && hi == at) return std::nullopt;
  if (lo > at) --lo;
  if (hi >= at) --hi;
  return r;
}

}  // namespace

Value evaluate(const Expr& e, const CellReader& reader,
               const std::function<Value(const std::string&)>& names) {
  return Evaluator(reader, names).eval(e);
}

std::vector<Region> references(const Expr& e) {
  std::vector<Region> out;
  collectRefs(e, out);
  return out;
}

Footprint accessFootprint(const Expr& e) {
  Footprint fp;
  fp.regions = references(e);
  for (const auto& r : fp.regions) fp.cellCount += r.area();
  return fp;
}

ExprPtr shiftForInsert(const ExprPtr& e, bool rows, Index after, Index count) {
  return rewrite(e, [&](const Region& r) { return insertShift(r, rows, after, count); });
}

ExprPtr shiftForDelete(const ExprPtr& e, bool rows, Index at) {
  return rewrite(e, [&](const Region& r) { return deleteShift(r, rows, at); });
}

bool touchedByInsert(const Expr& e, bool rows, Index after) {
  for (const auto& r : references(e)) {
    if ((rows ? r.bottom : r.right) > after) return true;
  }
  return false;
}

bool touchedByDelete(const Expr& e, bool rows, Index at) {
  for (const auto& r : references(e)) {
    if ((rows ? r.bottom : r.right) >= at) return true;
  }
  return false;
}

}  // namespace gridstore
