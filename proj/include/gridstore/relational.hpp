#pragma once

// Composite table values and the relational operators over them.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridstore/core.hpp"

namespace gridstore {

class RelationalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered rows of plain values (no formulae) under unique attribute names.
struct TableValue {
  std::vector<std::string> attributes;
  std::vector<std::vector<CellContent>> rows;

  Index rowCount() const { return static_cast<Index>(rows.size()); }
  Index attributeIndex(const std::string& name) const;  // throws RelationalError
  /// Throws RelationalError unless rectangular with unique, non-empty names.
  void validate() const;
  bool operator==(const TableValue&) const = default;
};

// Set operators need identical attribute lists and return distinct rows in
// left-operand order, then right.
TableValue unionOf(const TableValue& a, const TableValue& b);
TableValue difference(const TableValue& a, const TableValue& b);
TableValue intersection(const TableValue& a, const TableValue& b);

/// Bag semantics; attribute names must be disjoint.
TableValue crossProduct(const TableValue& a, const TableValue& b);
/// Natural join on shared attributes when `predicate` is empty, otherwise a
/// nested-loop join over disjoint attributes filtered by the predicate
/// (a formula such as "=qty>price", attribute names as bare identifiers).
TableValue join(const TableValue& a, const TableValue& b, const std::string& predicate = "");
TableValue filter(const TableValue& t, const std::string& predicate);
TableValue project(const TableValue& t, const std::vector<std::string>& attributes);
TableValue rename(const TableValue& t, const std::string& from, const std::string& to);
/// 1-based (row, attribute) lookup.
CellContent indexInto(const TableValue& t, Index i, Index j);

}  // namespace gridstore
