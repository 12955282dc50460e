#pragma once

// Minimal A1 formula language: parser, evaluator, access footprint and a
// dependency graph with eager recomputation.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridstore/core.hpp"

namespace gridstore {

enum class BinaryOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge };
enum class Function { Sum, Average, Min, Max, Count };

struct NumberLit {
  double value = 0;
};
struct StringLit {
  std::string value;
};
struct BoolLit {
  bool value = false;
};
struct CellRef {
  CellAddress addr;
};
struct RangeRef {
  Region region;  // always normalized
};
/// Bare identifier; resolved as an attribute name by relational filters.
struct NameRef {
  std::string name;
};
/// A reference invalidated by a structural edit; evaluates to #REF!.
struct RefErrorLit {};
struct Negate {
  ExprPtr operand;
};
struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Call {
  Function fn;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<NumberLit, StringLit, BoolLit, CellRef, RangeRef, NameRef, RefErrorLit, Negate, Binary,
               Call>
      node;
};

ExprPtr makeExpr(decltype(Expr::node) node);

/// Parses "=...". Throws ParseError (with byte offset) on syntax errors or
/// unknown function names.
ExprPtr parseFormula(std::string_view src);
/// Canonical source text, including the leading '='.
std::string formatFormula(const Expr& e);
bool structurallyEqual(const Expr& a, const Expr& b);

enum class ErrorCode { DivZero, Ref, Value, Name, Cycle };
struct FormulaError {
  ErrorCode code;
  bool operator==(const FormulaError&) const = default;
};
std::string_view errorText(ErrorCode c);

/// Result of evaluation.
using Value = std::variant<Empty, double, std::string, bool, FormulaError>;
std::string displayString(const Value& v);
bool sameValue(const Value& a, const Value& b);

/// Read access used by the evaluator. Implementations decide how a range is
/// fetched (naive sheet scan, or through a physical layout).
class CellReader {
 public:
  virtual ~CellReader() = default;
  virtual Index rowExtent() const = 0;
  virtual Index colExtent() const = 0;
  /// Value of one cell (formula cells yield their computed value).
  virtual Value value(CellAddress a) const = 0;
  /// Visits every non-empty cell value inside `r` (order unspecified).
  virtual void forEachValue(const Region& r,
                            const std::function<void(CellAddress, const Value&)>& fn) const;
};

/// Evaluates with a name resolver for NameRef nodes (relational predicates).
Value evaluate(const Expr& e, const CellReader& reader,
               const std::function<Value(const std::string&)>& names = {});

/// Plain Sheet reader: formula cells are evaluated recursively on demand
/// (callers guarantee acyclicity).
class SheetReader : public CellReader {
 public:
  explicit SheetReader(const Sheet& s) : sheet_(s) {}
  Index rowExtent() const override { return sheet_.rows(); }
  Index colExtent() const override { return sheet_.cols(); }
  Value value(CellAddress a) const override;
  void forEachValue(const Region& r,
                    const std::function<void(CellAddress, const Value&)>& fn) const override;

 private:
  const Sheet& sheet_;
  mutable std::map<CellAddress, Value> memo_;
};

Value toValue(const CellContent& c);

struct Footprint {
  std::vector<Region> regions;
  Index cellCount = 0;  // summed per region, overlaps not deduplicated
};
Footprint accessFootprint(const Expr& e);

/// Every cell and range reference, in source order.
std::vector<Region> references(const Expr& e);

class CycleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward edges cell -> precedent regions; inverse edges cell -> dependents.
class DependencyGraph {
 public:
  /// Replaces the precedents of `cell`. Throws CycleError (graph unchanged)
  /// if the edit would close a directed cycle among formula cells.
  void setFormula(CellAddress cell, const Expr& expr);
  /// Like setFormula without the cycle check (caller guarantees acyclicity).
  void assign(CellAddress cell, const Expr& expr);
  void removeFormula(CellAddress cell);
  bool hasFormula(CellAddress cell) const { return forward_.count(cell) != 0; }

  const std::vector<Region>& precedents(CellAddress cell) const;
  /// Formula cells whose precedents contain `cell`.
  std::set<CellAddress> dependents(CellAddress cell) const;
  /// Transitive dependents of `changed`, in evaluation (topological) order.
  std::vector<CellAddress> dirtyOrder(const std::set<CellAddress>& changed) const;
  /// All formula cells in topological order.
  std::vector<CellAddress> topologicalOrder() const;

  std::size_t size() const { return forward_.size(); }
  const std::map<CellAddress, std::vector<Region>>& forward() const { return forward_; }
  /// Checks that inverse edges are the transpose of forward edges.
  bool consistent() const;

 private:
  bool reaches(CellAddress from, const std::vector<Region>& precedentsOfTarget,
               CellAddress target) const;
  void index(CellAddress cell, const std::vector<Region>& regs);
  void unindex(CellAddress cell, const std::vector<Region>& regs);

  std::map<CellAddress, std::vector<Region>> forward_;
  // Inverse edges: single-cell precedents are indexed exactly; range
  // precedents are kept in a list and matched by containment.
  std::map<CellAddress, std::set<CellAddress>> cellDependents_;
  std::vector<std::pair<Region, CellAddress>> rangeDependents_;
};

/// Re-evaluates all transitive dependents of `changed` in topological order
/// and returns the cells whose values changed. `values` holds the computed
/// value of every formula cell and is updated in place.
std::vector<std::pair<CellAddress, Value>> recompute(const DependencyGraph& graph,
                                                     const Sheet& sheet,
                                                     const std::set<CellAddress>& changed,
                                                     std::map<CellAddress, Value>& values);

/// Reader over a sheet whose formula values come from a precomputed map.
class CachedSheetReader : public CellReader {
 public:
  CachedSheetReader(const Sheet& s, const std::map<CellAddress, Value>& values)
      : sheet_(s), values_(values) {}
  Index rowExtent() const override { return sheet_.rows(); }
  Index colExtent() const override { return sheet_.cols(); }
  Value value(CellAddress a) const override;
  void forEachValue(const Region& r,
                    const std::function<void(CellAddress, const Value&)>& fn) const override;

 private:
  const Sheet& sheet_;
  const std::map<CellAddress, Value>& values_;
};

/// Reference adjustment for structural edits. `after` is the row/column the
/// insertion follows (0 = top); deletion removes `at`.
ExprPtr shiftForInsert(const ExprPtr& e, bool rows, Index after, Index count = 1);
ExprPtr shiftForDelete(const ExprPtr& e, bool rows, Index at);
/// Whether `shiftFor*` would change anything.
bool touchedByInsert(const Expr& e, bool rows, Index after);
bool touchedByDelete(const Expr& e, bool rows, Index at);

}  // namespace gridstore
