#include "gridstore/relational.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "gridstore/formula.hpp"

namespace gridstore {

namespace {

std::string rowKey(const std::vector<CellContent>& row) {
  std::string k;
  for (const auto& c : row) {
    k += static_cast<char>('0' + c.index());
    k += describe(c);
    k += '\x1f';
  }
  return k;
}

void sameSchema(const TableValue& a, const TableValue& b) {
  a.validate();
  b.validate();
  if (a.attributes != b.attributes) throw RelationalError("attribute lists differ");
}

void disjointSchema(const TableValue& a, const TableValue& b) {
  a.validate();
  b.validate();
  const std::set<std::string> names(a.attributes.begin(), a.attributes.end());
  for (const auto& n : b.attributes) {
    if (names.count(n)) throw RelationalError("attribute '" + n + "' on both sides");
  }
}

class NoCells : public CellReader {
 public:
  Index rowExtent() const override { return 0; }
  Index colExtent() const override { return 0; }
  Value value(CellAddress) const override { return Empty{}; }
};

ExprPtr parsePredicate(const std::string& predicate) {
  try {
    return parseFormula(!predicate.empty() && predicate[0] == '=' ? predicate : "=" + predicate);
  } catch (const ParseError& e) {
    throw RelationalError(std::string("bad predicate: ") + e.what());
  }
}

bool truthy(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* d = std::get_if<double>(&v)) return *d != 0;
  return false;
}

bool holds(const Expr& e, const std::vector<std::string>& attrs,
           const std::vector<CellContent>& row) {
  static const NoCells none;
  const auto v = evaluate(e, none, [&](const std::string& name) -> Value {
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (attrs[i] == name) return toValue(row[i]);
    }
    throw RelationalError("unknown attribute '" + name + "'");
  });
  return truthy(v);
}

}  // namespace

Index TableValue::attributeIndex(const std::string& name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i] == name) return static_cast<Index>(i);
  }
  throw RelationalError("unknown attribute '" + name + "'");
}

void TableValue::validate() const {
  std::set<std::string> seen;
  for (const auto& a : attributes) {
    if (a.empty()) throw RelationalError("empty attribute name");
    if (!seen.insert(a).second) throw RelationalError("duplicate attribute '" + a + "'");
  }
  for (const auto& r : rows) {
    if (r.size() != attributes.size()) throw RelationalError("ragged row");
    for (const auto& c : r) {
      if (isFormula(c)) throw RelationalError("formula inside a table value");
    }
  }
}

TableValue unionOf(const TableValue& a, const TableValue& b) {
  sameSchema(a, b);
  TableValue out{a.attributes, {}};
  std::unordered_set<std::string> seen;
  for (const auto* t : {&a, &b}) {
    for (const auto& r : t->rows) {
      if (seen.insert(rowKey(r)).second) out.rows.push_back(r);
    }
  }
  return out;
}

TableValue difference(const TableValue& a, const TableValue& b) {
  sameSchema(a, b);
  std::unordered_set<std::string> drop;
  for (const auto& r : b.rows) drop.insert(rowKey(r));
  TableValue out{a.attributes, {}};
  std::unordered_set<std::string> seen;
  for (const auto& r : a.rows) {
    const auto k = rowKey(r);
    if (!drop.count(k) && seen.insert(k).second) out.rows.push_back(r);
  }
  return out;
}

TableValue intersection(const TableValue& a, const TableValue& b) {
  sameSchema(a, b);
  std::unordered_set<std::string> keep;
  for (const auto& r : b.rows) keep.insert(rowKey(r));
  TableValue out{a.attributes, {}};
  std::unordered_set<std::string> seen;
  for (const auto& r : a.rows) {
    const auto k = rowKey(r);
    if (keep.count(k) && seen.insert(k).second) out.rows.push_back(r);
  }
  return out;
}

TableValue crossProduct(const TableValue& a, const TableValue& b) {
  disjointSchema(a, b);
  TableValue out{a.attributes, {}};
  out.attributes.insert(out.attributes.end(), b.attributes.begin(), b.attributes.end());
  out.rows.reserve(a.rows.size() * b.rows.size());
  for (const auto& ra : a.rows) {
    for (const auto& rb : b.rows) {
      auto row = ra;
      row.insert(row.end(), rb.begin(), rb.end());
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

TableValue join(const TableValue& a, const TableValue& b, const std::string& predicate) {
  if (!predicate.empty()) {
    const auto expr = parsePredicate(predicate);
    const auto x = crossProduct(a, b);
    TableValue out{x.attributes, {}};
    for (const auto& r : x.rows) {
      if (holds(*expr, x.attributes, r)) out.rows.push_back(r);
    }
    return out;
  }
  a.validate();
  b.validate();
  std::vector<std::pair<std::size_t, std::size_t>> shared;
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < b.attributes.size(); ++j) {
    bool found = false;
    for (std::size_t i = 0; i < a.attributes.size(); ++i) {
      if (a.attributes[i] == b.attributes[j]) {
        shared.emplace_back(i, j);
        found = true;
      }
    }
    if (!found) rest.push_back(j);
  }
  TableValue out{a.attributes, {}};
  for (const auto j : rest) out.attributes.push_back(b.attributes[j]);
  std::unordered_multimap<std::string, std::size_t> index;
  for (std::size_t k = 0; k < b.rows.size(); ++k) {
    std::vector<CellContent> key;
    for (const auto& [i, j] : shared) key.push_back(b.rows[k][j]);
    index.emplace(rowKey(key), k);
  }
  for (const auto& ra : a.rows) {
    std::vector<CellContent> key;
    for (const auto& [i, j] : shared) key.push_back(ra[i]);
    auto [lo, hi] = index.equal_range(rowKey(key));
    std::vector<std::size_t> matches;
    for (auto it = lo; it != hi; ++it) matches.push_back(it->second);
    std::sort(matches.begin(), matches.end());
    for (const auto k : matches) {
      auto row = ra;
      for (const auto j : rest) row.push_back(b.rows[k][j]);
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

TableValue filter(const TableValue& t, const std::string& predicate) {
  t.validate();
  const auto expr = parsePredicate(predicate);
  TableValue out{t.attributes, {}};
  for (const auto& r : t.rows) {
    if (holds(*expr, t.attributes, r)) out.rows.push_back(r);
  }
  return out;
}

TableValue project(const TableValue& t, const std::vector<std::string>& attributes) {
  t.validate();
  std::vector<Index> idx;
  for (const auto& a : attributes) idx.push_back(t.attributeIndex(a));
  TableValue out{attributes, {}};
  out.validate();
  for (const auto& r : t.rows) {
    std::vector<CellContent> row;
    for (const auto i : idx) row.push_back(r[static_cast<std::size_t>(i)]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

TableValue rename(const TableValue& t, const std::string& from, const std::string& to) {
  TableValue out = t;
  out.attributes[static_cast<std::size_t>(t.attributeIndex(from))] = to;
  out.validate();
  return out;
}

CellContent indexInto(const TableValue& t, Index i, Index j) {
  if (i < 1 || i > t.rowCount() || j < 1 || j > static_cast<Index>(t.attributes.size())) {
    throw RelationalError("index out of range");
  }
  return t.rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
}

}  // namespace gridstore
