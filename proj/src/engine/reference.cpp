#include "gridstore/reference.hpp"

#include <set>

namespace gridstore {

CellContent ReferenceEngine::content(CellAddress a) const { return sheet_.get(a); }

Value ReferenceEngine::value(CellAddress a) const {
  if (a.row < 1 || a.row > rows() || a.col < 1 || a.col > cols()) return Empty{};
  if (!reader_) reader_ = std::make_unique<SheetReader>(sheet_);
  return reader_->value(a);
}

bool ReferenceEngine::reachesItself(CellAddress start) const {
  const auto* f = std::get_if<Formula>(&sheet_.get(start));
  if (!f) return false;
  std::vector<Region> stack = references(*f->expr);
  std::set<CellAddress> seen;
  while (!stack.empty()) {
    const Region r = stack.back();
    stack.pop_back();
    if (r.contains(start)) return true;
    for (const auto& [a, c] : sheet_.cells()) {
      if (!r.contains(a) || !seen.insert(a).second) continue;
      if (const auto* g = std::get_if<Formula>(&c)) {
        const auto refs = references(*g->expr);
        stack.insert(stack.end(), refs.begin(), refs.end());
      }
    }
  }
  return false;
}

void ReferenceEngine::updateCell(CellAddress a, const CellContent& c) {
  const CellContent before = sheet_.get(a);
  const auto* f = std::get_if<Formula>(&c);
  sheet_.set(a, f && !f->expr ? formula(f->source) : c);
  reader_.reset();
  if (reachesItself(a)) {
    sheet_.set(a, before);
    throw CycleError("circular reference at " + formatA1(a));
  }
}

void ReferenceEngine::rebuild(bool rows, bool insert, Index at) {
  Sheet next(sheet_.rows() + (rows ? (insert ? 1 : -1) : 0), sheet_.cols() + (rows ? 0 : (insert ? 1 : -1)));
  for (const auto& [a, c] : sheet_.cells()) {
    CellAddress b = a;
    Index& k = rows ? b.row : b.col;
    if (!insert && k == at) continue;
    if (k > at) k += insert ? 1 : -1;
    CellContent moved = c;
    if (const auto* f = std::get_if<Formula>(&c)) {
      const bool touched = insert ? touchedByInsert(*f->expr, rows, at) : touchedByDelete(*f->expr, rows, at);
      if (touched) {
        const ExprPtr e = insert ? shiftForInsert(f->expr, rows, at) : shiftForDelete(f->expr, rows, at);
        moved = Formula{formatFormula(*e), e};
      }
    }
    next.set(b, std::move(moved));
  }
  sheet_ = std::move(next);
  reader_.reset();
}

void ReferenceEngine::insertRowAfter(Index row) {
  if (row < 0 || row > rows()) throw OutOfRange("insert position outside the sheet");
  rebuild(true, true, row);
}

void ReferenceEngine::insertColumnAfter(Index col) {
  if (col < 0 || col > cols()) throw OutOfRange("insert position outside the sheet");
  rebuild(false, true, col);
}

void ReferenceEngine::deleteRow(Index row) {
  if (row < 1 || row > rows()) throw OutOfRange("delete position outside the sheet");
  rebuild(true, false, row);
}

void ReferenceEngine::deleteColumn(Index col) {
  if (col < 1 || col > cols()) throw OutOfRange("delete position outside the sheet");
  rebuild(false, false, col);
}

}  // namespace gridstore
