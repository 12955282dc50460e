#include "gridstore/engine.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace gridstore {

struct SheetEngine::Table {
  ModelKind kind = ModelKind::ROM;
  Region region;
  std::string name;
  // ROM/TOM: tuples per row id, slots per column id. COM: the reverse.
  std::unordered_map<ItemId, std::size_t> slot;
  std::unordered_map<ItemId, std::vector<CellContent>> tuples;

  bool byRow() const { return kind != ModelKind::COM; }

  const CellContent* find(RowId r, ColId c) const {
    const ItemId major = byRow() ? r : c;
    const ItemId minor = byRow() ? c : r;
    const auto t = tuples.find(major);
    if (t == tuples.end()) return nullptr;
    const auto s = slot.find(minor);
    if (s == slot.end() || s->second >= t->second.size()) return nullptr;
    return &t->second[s->second];
  }

  void set(RowId r, ColId c, const CellContent& v) {
    const ItemId major = byRow() ? r : c;
    const ItemId minor = byRow() ? c : r;
    auto s = slot.find(minor);
    auto t = tuples.find(major);
    if (isEmpty(v) && (s == slot.end() || t == tuples.end())) return;
    if (s == slot.end()) s = slot.emplace(minor, slot.size()).first;
    if (t == tuples.end()) t = tuples.emplace(major, std::vector<CellContent>(slot.size())).first;
    if (t->second.size() <= s->second) t->second.resize(slot.size());
    t->second[s->second] = v;
  }
};

namespace {

std::vector<ItemId> iotaIds(Index n) {
  std::vector<ItemId> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), ItemId{1});
  return ids;
}

// Adjusts `r` for a structural edit; false when the region vanished.
bool shiftRegion(Region& r, bool rows, bool insert, Index at) {
  Index& lo = rows ? r.top : r.left;
  Index& hi = rows ? r.bottom : r.right;
  if (insert) {
    if (hi <= at) return true;
    if (lo > at) ++lo;
    ++hi;
    return true;
  }
  if (hi < at) return true;
  if (lo > at) --lo;
  --hi;
  return lo <= hi;
}

// Up to four strips covering a minus b.
std::vector<Region> subtract(const Region& a, const Region& b) {
  const auto x = a.intersection(b);
  if (!x) return {a};
  std::vector<Region> out;
  if (a.top < x->top) out.push_back({a.top, a.left, x->top - 1, a.right});
  if (x->bottom < a.bottom) out.push_back({x->bottom + 1, a.left, a.bottom, a.right});
  if (a.left < x->left) out.push_back({x->top, a.left, x->bottom, x->left - 1});
  if (x->right < a.right) out.push_back({x->top, x->right + 1, x->bottom, a.right});
  return out;
}

CellContent fromValue(const Value& v) {
  struct Visitor {
    CellContent operator()(const Empty&) const { return Empty{}; }
    CellContent operator()(double d) const { return number(d); }
    CellContent operator()(const std::string& s) const { return text(s); }
    CellContent operator()(bool b) const { return boolean(b); }
    CellContent operator()(const FormulaError& e) const { return text(std::string(errorText(e.code))); }
  };
  return std::visit(Visitor{}, v);
}

std::unordered_map<ItemId, Index> positions(const std::vector<ItemId>& ids) {
  std::unordered_map<ItemId, Index> pos;
  pos.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], static_cast<Index>(i + 1));
  return pos;
}

// Live layouts may extend past the filled bounding box (cells get cleared),
// so only disjointness and coverage within the extents are required.
RecoverabilityReport checkLayout(const Decomposition& d, const Sheet& sheet, Index rows, Index cols) {
  RecoverabilityReport rep;
  auto fail = [&](std::string msg, std::optional<CellAddress> cell = std::nullopt) {
    rep.ok = false;
    rep.message = std::move(msg);
    rep.cell = cell;
    return rep;
  };
  for (const auto& e : d.entries) {
    if (!e.region.valid() || e.region.bottom > rows || e.region.right > cols) {
      return fail("entry " + formatRange(e.region) + " outside the sheet");
    }
    if (e.kind == ModelKind::TOM && e.table.empty()) return fail("TOM entry without a table name");
  }
  if (const auto o = findOverlap(d.entries)) {
    return fail("entries " + formatRange(d.entries[o->first].region) + " and " +
                formatRange(d.entries[o->second].region) + " overlap");
  }
  for (const auto& [a, c] : sheet.cells()) {
    const bool covered = std::any_of(d.entries.begin(), d.entries.end(),
                                     [&](const DecompositionEntry& e) { return e.region.contains(a); });
    if (!covered) return fail("cell " + formatA1(a) + " is not covered by any entry", a);
  }
  return rep;
}

}  // namespace

class SheetEngine::Reader : public CellReader {
 public:
  explicit Reader(const SheetEngine& e) : e_(e) {}
  Index rowExtent() const override { return e_.rows_; }
  Index colExtent() const override { return e_.cols_; }
  Value value(CellAddress a) const override { return e_.value(a); }

  // Fetches through the layout: whole tuples from tables, single records
  // from the RCV overlay.
  void forEachValue(const Region& r,
                    const std::function<void(CellAddress, const Value&)>& fn) const override {
    auto emit = [&](CellAddress a, const CellContent& c) {
      if (isEmpty(c)) return;
      if (isFormula(c)) {
        const auto it = e_.formulaValues_.find(a);
        if (it != e_.formulaValues_.end() && !std::holds_alternative<Empty>(it->second)) fn(a, it->second);
      } else {
        fn(a, toValue(c));
      }
    };
    std::vector<CellContent> scratch;
    for (const auto& t : e_.tables_) {
      const auto x = t->region.intersection(r);
      if (!x) continue;
      const auto rowIds = e_.rowMap_->lookupRange(x->top, x->rowCount());
      const auto colIds = e_.colMap_->lookupRange(x->left, x->colCount());
      const auto& majors = t->byRow() ? rowIds : colIds;
      const auto& minors = t->byRow() ? colIds : rowIds;
      std::vector<std::size_t> slots(minors.size(), SIZE_MAX);
      for (std::size_t j = 0; j < minors.size(); ++j) {
        const auto s = t->slot.find(minors[j]);
        if (s != t->slot.end()) slots[j] = s->second;
      }
      for (std::size_t i = 0; i < majors.size(); ++i) {
        const auto tuple = t->tuples.find(majors[i]);
        if (tuple == t->tuples.end()) continue;
        ++e_.counters_.tupleReads;
        scratch.assign(tuple->second.begin(), tuple->second.end());
        for (std::size_t j = 0; j < minors.size(); ++j) {
          if (slots[j] >= scratch.size()) continue;
          const Index major = static_cast<Index>(i), minor = static_cast<Index>(j);
          const CellAddress a = t->byRow() ? CellAddress{x->top + major, x->left + minor}
                                           : CellAddress{x->top + minor, x->left + major};
          emit(a, scratch[slots[j]]);
        }
      }
    }
    for (const auto& g : e_.rcvRegions_) {
      const auto x = g.intersection(r);
      if (!x) continue;
      const auto rowIds = e_.rowMap_->lookupRange(x->top, x->rowCount());
      const auto colIds = e_.colMap_->lookupRange(x->left, x->colCount());
      for (std::size_t i = 0; i < rowIds.size(); ++i) {
        for (std::size_t j = 0; j < colIds.size(); ++j) {
          const auto it = e_.rcv_.find({rowIds[i], colIds[j]});
          if (it == e_.rcv_.end()) continue;
          ++e_.counters_.tupleReads;
          emit({x->top + static_cast<Index>(i), x->left + static_cast<Index>(j)}, it->second);
        }
      }
    }
  }

 private:
  const SheetEngine& e_;
};

SheetEngine::SheetEngine(Index rows, Index cols, EngineOptions options) : options_(options) {
  if (rows < 0 || cols < 0) throw OutOfRange("negative extents");
  init(rows, cols);
}

SheetEngine::SheetEngine(const Sheet& sheet, EngineOptions options,
                         const std::optional<Decomposition>& layout)
    : options_(options) {
  init(sheet.rows(), sheet.cols());
  Decomposition d;
  if (layout) {
    d = *layout;
  } else if (const auto box = boundingBox(sheet)) {
    d.entries.push_back({*box, ModelKind::RCV, ""});
  }
  const auto rep = checkLayout(d, sheet, rows_, cols_);
  if (!rep.ok) throw std::invalid_argument("layout not recoverable: " + rep.message);
  materialize(sheet, d);
  loadFormulas(sheet);
}

SheetEngine::SheetEngine(const Sheet& sheet, std::vector<RowId> rowIds, std::vector<ColId> colIds,
                         const Decomposition& layout, EngineOptions options)
    : options_(options) {
  if (static_cast<Index>(rowIds.size()) != sheet.rows() ||
      static_cast<Index>(colIds.size()) != sheet.cols()) {
    throw std::invalid_argument("identifier count does not match sheet extents");
  }
  for (const auto* ids : {&rowIds, &colIds}) {
    std::unordered_set<ItemId> seen(ids->begin(), ids->end());
    if (seen.size() != ids->size() || seen.count(0)) throw std::invalid_argument("bad identifiers");
  }
  rows_ = sheet.rows();
  cols_ = sheet.cols();
  nextRowId_ = rowIds.empty() ? 1 : *std::max_element(rowIds.begin(), rowIds.end()) + 1;
  nextColId_ = colIds.empty() ? 1 : *std::max_element(colIds.begin(), colIds.end()) + 1;
  rowMap_ = makePositionalMap(options_.posmap, rowIds);
  colMap_ = makePositionalMap(options_.posmap, colIds);
  const auto rep = checkLayout(layout, sheet, rows_, cols_);
  if (!rep.ok) throw std::invalid_argument("layout not recoverable: " + rep.message);
  materialize(sheet, layout);
  loadFormulas(sheet);
}

SheetEngine::~SheetEngine() = default;
SheetEngine::SheetEngine(SheetEngine&&) noexcept = default;
SheetEngine& SheetEngine::operator=(SheetEngine&&) noexcept = default;

void SheetEngine::init(Index rows, Index cols) {
  rows_ = rows;
  cols_ = cols;
  rowMap_ = makePositionalMap(options_.posmap, iotaIds(rows));
  colMap_ = makePositionalMap(options_.posmap, iotaIds(cols));
  nextRowId_ = static_cast<RowId>(rows) + 1;
  nextColId_ = static_cast<ColId>(cols) + 1;
}

void SheetEngine::materialize(const Sheet& sheet, const Decomposition& layout) {
  for (const auto& e : layout.entries) {
    if (e.region.bottom > rows_ || e.region.right > cols_) {
      throw OutOfRange("layout entry " + formatRange(e.region) + " exceeds the sheet");
    }
    if (e.kind == ModelKind::RCV) {
      rcvRegions_.push_back(e.region);
    } else {
      auto t = std::make_unique<Table>();
      t->kind = e.kind;
      t->region = e.region;
      t->name = e.table;
      tables_.push_back(std::move(t));
    }
  }
  const auto rowIds = rowMap_->toVector();
  const auto colIds = colMap_->toVector();
  for (const auto& [a, c] : sheet.cells()) {
    if (a.row > rows_ || a.col > cols_) throw OutOfRange("cell " + formatA1(a) + " exceeds the sheet");
    const RowId r = rowIds[static_cast<std::size_t>(a.row - 1)];
    const ColId col = colIds[static_cast<std::size_t>(a.col - 1)];
    if (Table* t = owner(a)) {
      t->set(r, col, c);
    } else {
      rcv_[{r, col}] = c;
    }
    ++counters_.tupleWrites;
  }
}

void SheetEngine::loadFormulas(const Sheet& sheet) {
  formulas_.clear();
  formulaValues_.clear();
  graph_ = DependencyGraph{};
  for (const auto& [a, c] : sheet.cells()) {
    if (const auto* f = std::get_if<Formula>(&c)) {
      const ExprPtr e = f->expr ? f->expr : std::get<Formula>(formula(f->source)).expr;
      graph_.setFormula(a, *e);
      formulas_[a] = e;
    }
  }
  recalculate();
}

std::size_t SheetEngine::recalculate() {
  formulaValues_.clear();
  const Reader reader(*this);
  std::size_t n = 0;
  for (const CellAddress a : graph_.topologicalOrder()) {
    formulaValues_[a] = evaluate(*formulas_.at(a), reader);
    ++n;
  }
  return n;
}

SheetEngine::Table* SheetEngine::owner(CellAddress a) {
  for (auto& t : tables_) {
    if (t->region.contains(a)) return t.get();
  }
  return nullptr;
}

const SheetEngine::Table* SheetEngine::owner(CellAddress a) const {
  for (const auto& t : tables_) {
    if (t->region.contains(a)) return t.get();
  }
  return nullptr;
}

CellContent SheetEngine::readStored(CellAddress a, RowId r, ColId c) const {
  if (const Table* t = owner(a)) {
    ++counters_.tupleReads;
    const CellContent* p = t->find(r, c);
    return p ? *p : CellContent{Empty{}};
  }
  const auto it = rcv_.find({r, c});
  if (it == rcv_.end()) return Empty{};
  ++counters_.tupleReads;
  return it->second;
}

void SheetEngine::writeStored(CellAddress a, const CellContent& content) {
  const RowId r = rowMap_->lookup(a.row);
  const ColId c = colMap_->lookup(a.col);
  if (Table* t = owner(a)) {
    t->set(r, c, content);
  } else if (isEmpty(content)) {
    rcv_.erase({r, c});
  } else {
    const bool covered = std::any_of(rcvRegions_.begin(), rcvRegions_.end(),
                                     [&](const Region& g) { return g.contains(a); });
    if (!covered) rcvRegions_.push_back(Region::cell(a));
    rcv_[{r, c}] = content;
  }
  ++counters_.tupleWrites;
  cachePut({r, c}, content);
}

void SheetEngine::cachePut(const IdPair& key, const CellContent& c) const {
  if (options_.cacheCells == 0) return;
  if (const auto it = cacheIndex_.find(key); it != cacheIndex_.end()) {
    it->second->second = c;
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  lru_.emplace_front(key, c);
  cacheIndex_[key] = lru_.begin();
  while (lru_.size() > options_.cacheCells) {
    cacheIndex_.erase(lru_.back().first);
    lru_.pop_back();
  }
}

CellContent SheetEngine::content(CellAddress a) const {
  if (a.row < 1 || a.row > rows_ || a.col < 1 || a.col > cols_) return Empty{};
  const IdPair key{rowMap_->lookup(a.row), colMap_->lookup(a.col)};
  if (options_.cacheCells != 0) {
    if (const auto it = cacheIndex_.find(key); it != cacheIndex_.end()) {
      ++counters_.cacheHits;
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
  }
  CellContent c = readStored(a, key.first, key.second);
  cachePut(key, c);
  return c;
}

Value SheetEngine::value(CellAddress a) const {
  if (formulas_.count(a)) {
    const auto it = formulaValues_.find(a);
    return it == formulaValues_.end() ? Value{Empty{}} : it->second;
  }
  return toValue(content(a));
}

std::vector<std::vector<CellContent>> SheetEngine::getCells(const Region& r, bool bypassCache) const {
  if (!r.valid() || r.bottom > rows_ || r.right > cols_) {
    throw OutOfRange("range " + formatRange(r) + " outside the sheet");
  }
  const auto rowIds = rowMap_->lookupRange(r.top, r.rowCount());
  const auto colIds = colMap_->lookupRange(r.left, r.colCount());
  const bool cached = options_.cacheCells != 0 && !bypassCache;
  std::vector<std::vector<CellContent>> out(static_cast<std::size_t>(r.rowCount()));
  for (std::size_t i = 0; i < rowIds.size(); ++i) {
    out[i].reserve(colIds.size());
    for (std::size_t j = 0; j < colIds.size(); ++j) {
      const IdPair key{rowIds[i], colIds[j]};
      if (cached) {
        if (const auto it = cacheIndex_.find(key); it != cacheIndex_.end()) {
          ++counters_.cacheHits;
          lru_.splice(lru_.begin(), lru_, it->second);
          out[i].push_back(it->second->second);
          continue;
        }
      }
      const CellAddress a{r.top + static_cast<Index>(i), r.left + static_cast<Index>(j)};
      out[i].push_back(readStored(a, key.first, key.second));
      if (cached) cachePut(key, out[i].back());
    }
  }
  return out;
}

std::vector<std::vector<Value>> SheetEngine::getValues(const Region& r) const {
  const auto cells = getCells(r);
  std::vector<std::vector<Value>> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells[i].size(); ++j) {
      const CellAddress a{r.top + static_cast<Index>(i), r.left + static_cast<Index>(j)};
      out[i].push_back(isFormula(cells[i][j]) ? value(a) : toValue(cells[i][j]));
    }
  }
  return out;
}

TableValue SheetEngine::readRegion(const Region& r) const {
  const auto values = getValues(r);
  TableValue t;
  for (const auto& v : values[0]) t.attributes.push_back(displayString(v));
  for (std::size_t i = 1; i < values.size(); ++i) {
    std::vector<CellContent> row;
    for (const auto& v : values[i]) row.push_back(fromValue(v));
    t.rows.push_back(std::move(row));
  }
  t.validate();
  return t;
}

std::vector<ChangedCell> SheetEngine::updateCell(CellAddress a, const CellContent& c) {
  const SheetLimits limits;
  if (a.row < 1 || a.col < 1 || a.row > limits.maxRows || a.col > limits.maxCols) {
    throw OutOfRange("cell " + formatA1(a) + " beyond the sheet limits");
  }
  CellContent stored = c;
  if (const auto* f = std::get_if<Formula>(&c)) {
    if (!f->expr) stored = formula(f->source);
    const ExprPtr e = std::get<Formula>(stored).expr;
    graph_.setFormula(a, *e);
    formulas_[a] = e;
  } else if (formulas_.erase(a)) {
    graph_.removeFormula(a);
    formulaValues_.erase(a);
  }
  const bool grown = a.row > rows_ || a.col > cols_;
  while (rows_ < a.row) rowMap_->insertAt(++rows_, nextRowId_++);
  while (cols_ < a.col) colMap_->insertAt(++cols_, nextColId_++);
  writeStored(a, stored);
  ++revision_;
  // References past the old extents stop being errors.
  if (grown) recalculate();
  std::vector<ChangedCell> out{{a, Value{}}};
  for (auto& ch : recomputeFrom({a})) {
    if (ch.addr != a) out.push_back(std::move(ch));
  }
  out[0].value = value(a);
  return out;
}

std::vector<ChangedCell> SheetEngine::recomputeFrom(const std::set<CellAddress>& changed) {
  std::vector<ChangedCell> out;
  const Reader reader(*this);
  for (const CellAddress cell : graph_.dirtyOrder(changed)) {
    Value v = evaluate(*formulas_.at(cell), reader);
    const auto it = formulaValues_.find(cell);
    if (it == formulaValues_.end() || !sameValue(it->second, v)) {
      formulaValues_[cell] = v;
      out.push_back({cell, std::move(v)});
    }
  }
  return out;
}

void SheetEngine::insertRowAfter(Index row) { structural(true, true, row); }
void SheetEngine::insertColumnAfter(Index col) { structural(false, true, col); }
void SheetEngine::deleteRow(Index row) { structural(true, false, row); }
void SheetEngine::deleteColumn(Index col) { structural(false, false, col); }

void SheetEngine::structural(bool rows, bool insert, Index at) {
  Index& extent = rows ? rows_ : cols_;
  PositionalMap& map = rows ? *rowMap_ : *colMap_;
  if (insert) {
    if (at < 0 || at > extent) throw OutOfRange("insert position outside the sheet");
    map.insertAt(at + 1, rows ? nextRowId_++ : nextColId_++);
    ++extent;
  } else {
    if (at < 1 || at > extent) throw OutOfRange("delete position outside the sheet");
    map.deleteAt(at);
    --extent;
  }

  std::erase_if(tables_, [&](const auto& t) { return !shiftRegion(t->region, rows, insert, at); });
  std::erase_if(rcvRegions_, [&](Region& g) { return !shiftRegion(g, rows, insert, at); });

  auto relocate = [&](CellAddress a) -> std::optional<CellAddress> {
    Index& k = rows ? a.row : a.col;
    if (!insert && k == at) return std::nullopt;
    if (k > at) k += insert ? 1 : -1;
    return a;
  };
  std::map<CellAddress, ExprPtr> formulas;
  std::map<CellAddress, Value> values;
  std::set<CellAddress> touched;
  for (const auto& [a, e] : formulas_) {
    const auto na = relocate(a);
    if (!na) continue;
    const bool t = insert ? touchedByInsert(*e, rows, at) : touchedByDelete(*e, rows, at);
    formulas[*na] = t ? (insert ? shiftForInsert(e, rows, at) : shiftForDelete(e, rows, at)) : e;
    if (t) touched.insert(*na);
    if (const auto v = formulaValues_.find(a); v != formulaValues_.end()) values[*na] = v->second;
  }
  formulas_ = std::move(formulas);
  formulaValues_ = std::move(values);
  graph_ = DependencyGraph{};
  for (const auto& [a, e] : formulas_) graph_.assign(a, *e);
  for (const CellAddress a : touched) {
    const ExprPtr& e = formulas_.at(a);
    writeStored(a, Formula{formatFormula(*e), e});
  }
  ++revision_;
  if (!insert) recomputeFrom(touched);
}

Decomposition SheetEngine::decomposition() const {
  Decomposition d;
  for (const auto& t : tables_) d.entries.push_back({t->region, t->kind, t->name});
  for (const auto& g : rcvRegions_) d.entries.push_back({g, ModelKind::RCV, ""});
  return d;
}

OptimizeResult SheetEngine::optimizeLayout(const OptimizeRequest& req) {
  const Sheet snap = snapshot();
  Constraints c;
  c.pinnedTom = linkedRegions();
  c.maxTableCols = req.maxTableCols;
  OptimizeResult res;
  if (req.eta) {
    // The optimizer works within the filled bounding box.
    Decomposition existing;
    const auto box = boundingBox(snap);
    for (const auto& e : decomposition().entries) {
      if (e.kind == ModelKind::TOM) {
        existing.entries.push_back(e);
      } else if (const auto x = box ? e.region.intersection(*box) : std::nullopt) {
        existing.entries.push_back({*x, e.kind, e.table});
      }
    }
    auto inc = incremental(snap, req.params, {*req.eta, existing, req.algorithm}, c, req.options);
    res.decomposition = std::move(inc.decomposition);
    res.migratedCells = inc.migratedCells;
  } else {
    res.decomposition = decompose(req.algorithm, snap, req.params, c, req.options);
    res.migratedCells = migrationCount(snap, res.decomposition, decomposition());
  }
  const auto rep = validateRecoverability(res.decomposition, snap, c);
  if (!rep.ok) throw std::logic_error("optimizer produced an unrecoverable layout: " + rep.message);
  res.cost = hybridCost(res.decomposition, snap, req.params);
  relayout(snap, res.decomposition);
  ++revision_;
  return res;
}

void SheetEngine::relayout(const Sheet& sheet, const Decomposition& layout) {
  tables_.clear();
  rcvRegions_.clear();
  rcv_.clear();
  materialize(sheet, layout);
}

Sheet SheetEngine::snapshot() const {
  Sheet s(rows_, cols_);
  const auto rowPos = positions(rowMap_->toVector());
  const auto colPos = positions(colMap_->toVector());
  for (const auto& t : tables_) {
    const auto& majorPos = t->byRow() ? rowPos : colPos;
    const auto& minorPos = t->byRow() ? colPos : rowPos;
    std::vector<std::pair<std::size_t, Index>> live;
    for (const auto& [id, slot] : t->slot) {
      if (const auto p = minorPos.find(id); p != minorPos.end()) live.emplace_back(slot, p->second);
    }
    for (const auto& [id, tuple] : t->tuples) {
      const auto p = majorPos.find(id);
      if (p == majorPos.end()) continue;
      for (const auto& [slot, q] : live) {
        if (slot >= tuple.size() || isEmpty(tuple[slot])) continue;
        s.set(t->byRow() ? CellAddress{p->second, q} : CellAddress{q, p->second}, tuple[slot]);
      }
    }
  }
  for (const auto& [key, c] : rcv_) {
    const auto r = rowPos.find(key.first);
    const auto col = colPos.find(key.second);
    if (r != rowPos.end() && col != colPos.end()) s.set({r->second, col->second}, c);
  }
  return s;
}

std::vector<PinnedTable> SheetEngine::linkedRegions() const {
  std::vector<PinnedTable> out;
  for (const auto& t : tables_) {
    if (t->kind == ModelKind::TOM) out.push_back({t->region, t->name});
  }
  return out;
}

std::optional<Region> SheetEngine::linkedRegion(const std::string& table) const {
  for (const auto& t : tables_) {
    if (t->kind == ModelKind::TOM && t->name == table) return t->region;
  }
  return std::nullopt;
}

TableValue SheetEngine::readLinked(const std::string& table) const {
  const auto r = linkedRegion(table);
  if (!r) throw std::out_of_range("table '" + table + "' is not linked to this sheet");
  return readRegion(*r);
}

void SheetEngine::link(const Region& r, const std::string& table) {
  if (!r.valid() || r.bottom > rows_ || r.right > cols_) {
    throw OutOfRange("range " + formatRange(r) + " outside the sheet");
  }
  if (table.empty()) throw ConstraintError("table name is empty");
  for (const auto& t : tables_) {
    if (t->kind != ModelKind::TOM) continue;
    if (t->name == table) throw ConstraintError("table '" + table + "' is already linked");
    if (t->region.intersects(r)) {
      throw ConstraintError("range overlaps linked table '" + t->name + "'");
    }
  }
  Decomposition d;
  for (const auto& e : decomposition().entries) {
    for (const auto& piece : subtract(e.region, r)) d.entries.push_back({piece, e.kind, e.table});
  }
  d.entries.push_back({r, ModelKind::TOM, table});
  relayout(snapshot(), d);
  ++revision_;
}

void SheetEngine::renderLinked(const std::string& table, const TableValue& t) {
  t.validate();
  const auto old = linkedRegion(table);
  if (!old) throw std::out_of_range("table '" + table + "' is not linked to this sheet");
  if (t.attributes.empty()) throw ConstraintError("table '" + table + "' has no attributes");
  const Region next{old->top, old->left, old->top + t.rowCount(),
                    old->left + static_cast<Index>(t.attributes.size()) - 1};
  for (const auto& other : linkedRegions()) {
    if (other.table != table && other.region.intersects(next)) {
      throw ConstraintError("table '" + table + "' would overlap linked table '" + other.table + "'");
    }
  }
  while (rows_ < next.bottom) insertRowAfter(rows_);
  while (cols_ < next.right) insertColumnAfter(cols_);
  for (Index r = old->top; r <= old->bottom; ++r) {
    for (Index c = old->left; c <= old->right; ++c) {
      if (!next.contains(CellAddress{r, c}) && !isEmpty(content({r, c}))) updateCell({r, c}, Empty{});
    }
  }
  auto put = [&](CellAddress a, const CellContent& v) {
    if (!(content(a) == v)) updateCell(a, v);
  };
  for (std::size_t j = 0; j < t.attributes.size(); ++j) {
    put({next.top, next.left + static_cast<Index>(j)}, text(t.attributes[j]));
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < t.attributes.size(); ++j) {
      put({next.top + 1 + static_cast<Index>(i), next.left + static_cast<Index>(j)}, t.rows[i][j]);
    }
  }
  Decomposition d;
  for (const auto& e : decomposition().entries) {
    if (e.kind == ModelKind::TOM && e.table == table) continue;
    for (const auto& piece : subtract(e.region, next)) d.entries.push_back({piece, e.kind, e.table});
  }
  d.entries.push_back({next, ModelKind::TOM, table});
  relayout(snapshot(), d);
  ++revision_;
}

RecoverabilityReport SheetEngine::checkConsistency() const {
  RecoverabilityReport rep;
  auto fail = [&](std::string msg, std::optional<CellAddress> cell = std::nullopt) {
    rep.ok = false;
    rep.message = std::move(msg);
    rep.cell = cell;
    return rep;
  };
  if (rowMap_->size() != rows_ || colMap_->size() != cols_) return fail("positional map size mismatch");
  for (const auto* m : {rowMap_.get(), colMap_.get()}) {
    const auto inv = m->checkInvariants();
    if (!inv.ok) return fail("positional map: " + inv.message);
  }
  const auto d = decomposition();
  for (const auto& e : d.entries) {
    if (e.region.bottom > rows_ || e.region.right > cols_) {
      return fail("entry " + formatRange(e.region) + " exceeds the sheet");
    }
  }
  const Sheet snap = snapshot();
  if (auto r = checkLayout(d, snap, rows_, cols_); !r.ok) return r;

  const auto rowPos = positions(rowMap_->toVector());
  const auto colPos = positions(colMap_->toVector());
  for (const auto& t : tables_) {
    const auto& majorPos = t->byRow() ? rowPos : colPos;
    const auto& minorPos = t->byRow() ? colPos : rowPos;
    for (const auto& [id, tuple] : t->tuples) {
      const auto p = majorPos.find(id);
      if (p == majorPos.end()) continue;
      for (const auto& [minor, slot] : t->slot) {
        const auto q = minorPos.find(minor);
        if (q == minorPos.end() || slot >= tuple.size() || isEmpty(tuple[slot])) continue;
        const CellAddress a = t->byRow() ? CellAddress{p->second, q->second} : CellAddress{q->second, p->second};
        if (!t->region.contains(a)) return fail("table cell stored outside its region", a);
      }
    }
  }
  for (const auto& [key, content] : rcv_) {
    const auto r = rowPos.find(key.first);
    const auto col = colPos.find(key.second);
    if (r == rowPos.end() || col == colPos.end()) continue;
    const CellAddress a{r->second, col->second};
    const bool covered = std::any_of(rcvRegions_.begin(), rcvRegions_.end(),
                                     [&](const Region& g) { return g.contains(a); });
    if (owner(a) || !covered) return fail("RCV record outside the overlay regions", a);
  }

  std::size_t formulaCells = 0;
  for (const auto& [a, content] : snap.cells()) {
    if (!isFormula(content)) continue;
    ++formulaCells;
    if (!formulas_.count(a)) return fail("formula cell missing from the formula index", a);
  }
  if (formulaCells != formulas_.size() || graph_.size() != formulas_.size()) {
    return fail("formula index size mismatch");
  }
  if (!graph_.consistent()) return fail("dependency graph inverse edges inconsistent");
  const SheetReader naive(snap);
  for (const auto& [a, e] : formulas_) {
    const auto it = formulaValues_.find(a);
    const Value expect = naive.value(a);
    if (it == formulaValues_.end() || !sameValue(it->second, expect)) {
      return fail("stale value at " + formatA1(a) + ": " +
                      (it == formulaValues_.end() ? "missing" : displayString(it->second)) + " vs " +
                      displayString(expect),
                  a);
    }
  }
  for (const auto& [key, content] : lru_) {
    const auto r = rowPos.find(key.first);
    const auto col = colPos.find(key.second);
    if (r == rowPos.end() || col == colPos.end()) continue;
    const CellAddress a{r->second, col->second};
    if (!(readStored(a, key.first, key.second) == content)) return fail("stale cache entry", a);
  }
  return rep;
}

SheetEngine& Workbook::addSheet(const std::string& name, Index rows, Index cols) {
  return addSheet(name, SheetEngine(rows, cols, options_));
}

SheetEngine& Workbook::addSheet(const std::string& name, SheetEngine engine) {
  if (name.empty()) throw std::invalid_argument("sheet name is empty");
  const auto [it, inserted] = sheets_.emplace(name, std::move(engine));
  if (!inserted) throw std::invalid_argument("sheet '" + name + "' already exists");
  return it->second;
}

SheetEngine& Workbook::sheet(const std::string& name) {
  const auto it = sheets_.find(name);
  if (it == sheets_.end()) throw std::out_of_range("no sheet '" + name + "'");
  return it->second;
}

const SheetEngine& Workbook::sheet(const std::string& name) const {
  const auto it = sheets_.find(name);
  if (it == sheets_.end()) throw std::out_of_range("no sheet '" + name + "'");
  return it->second;
}

std::vector<std::string> Workbook::sheetNames() const {
  std::vector<std::string> out;
  for (const auto& [n, s] : sheets_) out.push_back(n);
  return out;
}

void Workbook::linkTable(const std::string& sheetName, const Region& r, const std::string& table) {
  SheetEngine& s = sheet(sheetName);
  if (linkedSheet(table)) throw ConstraintError("table '" + table + "' is already linked");
  if (const auto it = tables_.find(table); it != tables_.end()) {
    const Region next{r.top, r.left, r.top + it->second.rowCount(),
                      r.left + static_cast<Index>(it->second.attributes.size()) - 1};
    for (const auto& pin : s.linkedRegions()) {
      if (pin.region.intersects(next)) {
        throw ConstraintError("range overlaps linked table '" + pin.table + "'");
      }
    }
    s.link(Region::cell({r.top, r.left}), table);
    s.renderLinked(table, it->second);
    tables_.erase(it);
    return;
  }
  for (const auto& pin : s.linkedRegions()) {
    if (pin.region.intersects(r)) throw ConstraintError("range overlaps linked table '" + pin.table + "'");
  }
  s.readRegion(r);
  s.link(r, table);
}

void Workbook::setTable(const std::string& name, const TableValue& t) {
  t.validate();
  if (const auto linked = linkedSheet(name)) {
    sheet(*linked).renderLinked(name, t);
    return;
  }
  if (name.empty()) throw ConstraintError("table name is empty");
  tables_[name] = t;
}

TableValue Workbook::table(const std::string& name) const {
  if (const auto linked = linkedSheet(name)) return sheet(*linked).readLinked(name);
  const auto it = tables_.find(name);
  if (it == tables_.end()) throw std::out_of_range("no table '" + name + "'");
  return it->second;
}

bool Workbook::hasTable(const std::string& name) const {
  return tables_.count(name) != 0 || linkedSheet(name).has_value();
}

std::vector<std::string> Workbook::tableNames() const {
  std::vector<std::string> out;
  for (const auto& [n, t] : tables_) out.push_back(n);
  for (const auto& [n, s] : sheets_) {
    for (const auto& pin : s.linkedRegions()) out.push_back(pin.table);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> Workbook::linkedSheet(const std::string& table) const {
  for (const auto& [n, s] : sheets_) {
    if (s.linkedRegion(table)) return n;
  }
  return std::nullopt;
}

}  // namespace gridstore
