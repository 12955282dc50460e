#pragma once

// Naive reference engine: one dense-map Sheet, full re-evaluation on read,
// structural edits by rebuilding the map. Used as a differential oracle.

#include <memory>

#include "gridstore/core.hpp"
#include "gridstore/formula.hpp"

namespace gridstore {

class ReferenceEngine {
 public:
  ReferenceEngine(Index rows, Index cols) : sheet_(rows, cols) {}
  explicit ReferenceEngine(Sheet sheet) : sheet_(std::move(sheet)) {}

  Index rows() const { return sheet_.rows(); }
  Index cols() const { return sheet_.cols(); }
  const Sheet& sheet() const { return sheet_; }

  CellContent content(CellAddress a) const;
  Value value(CellAddress a) const;

  /// Grows extents on demand; throws CycleError (state unchanged).
  void updateCell(CellAddress a, const CellContent& c);
  void insertRowAfter(Index row);
  void insertColumnAfter(Index col);
  void deleteRow(Index row);
  void deleteColumn(Index col);

 private:
  bool reachesItself(CellAddress start) const;
  void rebuild(bool rows, bool insert, Index at);

  Sheet sheet_;
  mutable std::unique_ptr<SheetReader> reader_;
};

}  // namespace gridstore
