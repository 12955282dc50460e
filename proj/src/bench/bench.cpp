#include "gridstore/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <stdexcept>

#include "gridstore/formula.hpp"

namespace gridstore {

namespace {

Index uniform(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// Table plus the ring of formula slots below and to the right of it.
Region withRing(const Region& t) { return {t.top, t.left, t.bottom + 1, t.right + 1}; }

Region grown(const Region& r) { return {r.top - 1, r.left - 1, r.bottom + 1, r.right + 1}; }

}  // namespace

SyntheticSheet genSynthetic(const SyntheticSpec& spec) {
  SyntheticSheet out{Sheet(spec.rows, spec.cols), {}, {}};
  if (spec.tableCount <= 0 && spec.formulaCount <= 0) return out;
  if (spec.tableCount <= 0) throw std::runtime_error("formulae need at least one table");
  if (spec.minTableRows < 1 || spec.minTableCols < 1 || spec.minTableRows > spec.maxTableRows ||
      spec.minTableCols > spec.maxTableCols) {
    throw std::runtime_error("invalid table dimension range");
  }
  std::mt19937_64 rng(spec.seed);
  constexpr int kAttempts = 10000;
  for (int t = 0; t < spec.tableCount; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      const Index h = uniform(rng, spec.minTableRows, spec.maxTableRows);
      const Index w = uniform(rng, spec.minTableCols, spec.maxTableCols);
      if (h + 1 > spec.rows || w + 1 > spec.cols) continue;
      const Index top = uniform(rng, 1, spec.rows - h);
      const Index left = uniform(rng, 1, spec.cols - w);
      const Region cand{top, left, top + h - 1, left + w - 1};
      const Region guard = grown(withRing(cand));
      if (std::any_of(out.tables.begin(), out.tables.end(),
                      [&](const Region& o) { return guard.intersects(withRing(o)); })) {
        continue;
      }
      out.tables.push_back(cand);
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error("cannot place table " + std::to_string(t + 1) + " of " +
                               std::to_string(spec.tableCount));
    }
  }
  for (const auto& t : out.tables) {
    for (Index r = t.top; r <= t.bottom; ++r) {
      for (Index c = t.left; c <= t.right; ++c) {
        out.sheet.set({r, c}, number(static_cast<double>(uniform(rng, 0, 999))));
      }
    }
  }
  for (int f = 0; f < spec.formulaCount; ++f) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      const Region& t = out.tables[static_cast<std::size_t>(uniform(rng, 0, static_cast<Index>(out.tables.size()) - 1))];
      const Index slots = t.colCount() + t.rowCount();
      const Index k = uniform(rng, 0, slots - 1);
      const CellAddress at = k < t.colCount() ? CellAddress{t.bottom + 1, t.left + k}
                                              : CellAddress{t.top + (k - t.colCount()), t.right + 1};
      if (out.sheet.filled(at)) continue;
      Index r1 = uniform(rng, t.top, t.bottom), r2 = uniform(rng, t.top, t.bottom);
      Index c1 = uniform(rng, t.left, t.right), c2 = uniform(rng, t.left, t.right);
      if (r1 > r2) std::swap(r1, r2);
      if (c1 > c2) std::swap(c1, c2);
      const char* fn = uniform(rng, 0, 1) == 0 ? "SUM" : "AVERAGE";
      out.sheet.set(at, formula(std::string("=") + fn + "(" + formatRange({r1, c1, r2, c2}) + ")"));
      out.formulas.push_back(at);
      placed = true;
    }
    if (!placed) throw std::runtime_error("cannot place formula " + std::to_string(f + 1));
  }
  return out;
}

UpdateScript genUpdateWorkload(const UpdateWorkload& w, const Sheet& sheet) {
  const double mix[] = {w.updateExisting, w.addCell, w.addRow, w.addColumn};
  double sum = 0;
  for (double m : mix) {
    if (!(m >= 0)) throw std::invalid_argument("negative operation probability");
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("operation probabilities must sum to 1");
  if (w.batchSize < 1) throw std::invalid_argument("batch size must be positive");

  UpdateScript out;
  out.batchSize = w.batchSize;
  std::mt19937_64 rng(w.seed);
  std::discrete_distribution<int> pick(std::begin(mix), std::end(mix));
  std::vector<CellAddress> filled;
  filled.reserve(sheet.size());
  for (const auto& [a, c] : sheet.cells()) filled.push_back(a);
  Index rows = std::max<Index>(sheet.rows(), 1);
  Index cols = std::max<Index>(sheet.cols(), 1);

  auto anyCell = [&]() -> CellAddress {
    if (filled.empty()) return {uniform(rng, 1, rows), uniform(rng, 1, cols)};
    return filled[static_cast<std::size_t>(uniform(rng, 0, static_cast<Index>(filled.size()) - 1))];
  };
  for (Index i = 0; i < w.opCount; ++i) {
    UpdateOp op;
    op.kind = static_cast<UpdateKind>(pick(rng));
    switch (op.kind) {
      case UpdateKind::UpdateExisting:
        op.addr = anyCell();
        op.value = static_cast<double>(uniform(rng, 0, 999));
        if (filled.empty()) filled.push_back(op.addr);
        break;
      case UpdateKind::AddCell: {
        const CellAddress base = anyCell();
        const bool below = uniform(rng, 0, 1) == 0;
        op.addr = below ? CellAddress{base.row + 1, base.col} : CellAddress{base.row, base.col + 1};
        op.value = static_cast<double>(uniform(rng, 0, 999));
        rows = std::max(rows, op.addr.row);
        cols = std::max(cols, op.addr.col);
        filled.push_back(op.addr);
        break;
      }
      case UpdateKind::AddRow:
        op.after = uniform(rng, 0, rows);
        for (auto& a : filled) {
          if (a.row > op.after) ++a.row;
        }
        ++rows;
        break;
      case UpdateKind::AddColumn:
        op.after = uniform(rng, 0, cols);
        for (auto& a : filled) {
          if (a.col > op.after) ++a.col;
        }
        ++cols;
        break;
    }
    out.ops.push_back(op);
  }
  return out;
}

namespace {

template <typename E>
void apply(E& e, const UpdateOp& op) {
  switch (op.kind) {
    case UpdateKind::UpdateExisting:
    case UpdateKind::AddCell:
      e.updateCell(op.addr, number(op.value));
      break;
    case UpdateKind::AddRow:
      e.insertRowAfter(std::min(op.after, e.rows()));
      break;
    case UpdateKind::AddColumn:
      e.insertColumnAfter(std::min(op.after, e.cols()));
      break;
  }
}

}  // namespace

void applyOp(SheetEngine& e, const UpdateOp& op) { apply(e, op); }
void applyOp(ReferenceEngine& e, const UpdateOp& op) { apply(e, op); }

namespace {

CellContent typedField(const std::string& f) {
  try {
    return parseCellInput(f);
  } catch (const ParseError&) {
    return text(f);
  }
}

}  // namespace

Sheet importCsv(std::istream& in, bool headers) {
  Sheet sheet;
  Index row = 1;
  Index col = 1;
  std::string field;
  bool quoted = false;    // current field was quoted
  bool inQuotes = false;
  bool pending = false;   // a record has started
  auto endField = [&] {
    CellContent c = Empty{};
    if (!field.empty()) c = (quoted || (headers && row == 1)) ? text(field) : typedField(field);
    if (!isEmpty(c)) sheet.set({row, col}, std::move(c));
    sheet.resize(std::max(sheet.rows(), row), std::max(sheet.cols(), col));
    field.clear();
    quoted = false;
    ++col;
  };
  auto endRecord = [&] {
    endField();
    ++row;
    col = 1;
    pending = false;
  };
  char ch;
  while (in.get(ch)) {
    if (inQuotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          inQuotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    pending = true;
    if (ch == '"' && field.empty()) {
      inQuotes = true;
      quoted = true;
    } else if (ch == ',') {
      endField();
    } else if (ch == '\r' && in.peek() == '\n') {
      continue;
    } else if (ch == '\n') {
      endRecord();
    } else {
      field += ch;
    }
  }
  if (inQuotes) throw std::runtime_error("unterminated quoted field in record " + std::to_string(row));
  if (pending) endRecord();
  return sheet;
}

Sheet importCsvFile(const std::string& path, bool headers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return importCsv(in, headers);
}

Sheet importMask(std::string_view text) { return OccupancyMask::parse(text).toSheet(); }

std::vector<StorageRow> benchStorage(const Sheet& sheet, const DecomposeOptions& o) {
  std::vector<StorageRow> out;
  const auto bbox = boundingBox(sheet);
  auto whole = [&](ModelKind k) {
    Decomposition d;
    if (bbox) d.entries.push_back({*bbox, k, ""});
    return d;
  };
  const std::pair<const char*, CostParams> sets[] = {{"pg", pgParams()}, {"ideal", idealParams()}};
  for (const auto& [name, p] : sets) {
    const std::size_t first = out.size();
    out.push_back({"rom", name, hybridCost(whole(ModelKind::ROM), sheet, p), {}});
    out.push_back({"com", name, hybridCost(whole(ModelKind::COM), sheet, p), {}});
    out.push_back({"rcv", name, hybridCost(whole(ModelKind::RCV), sheet, p), {}});
    try {
      out.push_back({"dp", name, hybridCost(dpWeighted(sheet, p, {}, o), sheet, p), {}});
    } catch (const BudgetExceeded&) {
      out.push_back({"dp", name, std::nullopt, {}});
    }
    out.push_back({"greedy", name, hybridCost(greedy(sheet, p, {}, o), sheet, p), {}});
    out.push_back({"aggressive", name, hybridCost(aggressive(sheet, p, {}, o), sheet, p), {}});
    double worst = 0;
    for (std::size_t i = first; i < out.size(); ++i) {
      if (out[i].cost) worst = std::max(worst, *out[i].cost);
    }
    for (std::size_t i = first; i < out.size(); ++i) {
      if (!out[i].cost) continue;
      out[i].normalized = worst > 0 ? 100.0 * *out[i].cost / worst : 100.0;
    }
  }
  return out;
}

PosmapTiming benchPosmap(PosMapKind kind, Index n, int ops, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  std::vector<ItemId> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = static_cast<ItemId>(i + 1);
  auto map = makePositionalMap(kind, ids);
  ids.clear();
  ids.shrink_to_fit();
  std::mt19937_64 rng(seed);
  ItemId next = static_cast<ItemId>(n) + 1;
  double fetch = 0, insert = 0, erase = 0;
  ItemId sink = 0;
  auto us = [](Clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };
  for (int i = 0; i < ops; ++i) {
    const Index size = map->size();
    const Index pf = uniform(rng, 1, size);
    const Index pi = uniform(rng, 1, size + 1);
    const Index pd = uniform(rng, 1, size + 1);
    auto t0 = Clock::now();
    sink ^= map->lookup(pf);
    auto t1 = Clock::now();
    map->insertAt(pi, next++);
    auto t2 = Clock::now();
    sink ^= map->deleteAt(pd);
    auto t3 = Clock::now();
    fetch += us(t1 - t0);
    insert += us(t2 - t1);
    erase += us(t3 - t2);
  }
  if (sink == 0xFFFFFFFFFFFFFFFFULL) fetch += 0;
  const double k = ops > 0 ? ops : 1;
  return {std::string(posMapKindName(kind)), n, ops, fetch / k, insert / k, erase / k};
}

std::vector<FormulaRow> benchFormula(const Sheet& sheet, int repeats, const CostParams& p) {
  std::vector<Region> footprints;
  std::size_t formulas = 0;
  for (const auto& [a, c] : sheet.cells()) {
    if (!isFormula(c)) continue;
    ++formulas;
    for (const auto& r : references(*std::get<Formula>(c).expr)) footprints.push_back(r);
  }
  std::vector<std::pair<std::string, Decomposition>> layouts;
  const auto bbox = boundingBox(sheet);
  for (const auto& [name, kind] : {std::pair{"rom", ModelKind::ROM}, std::pair{"rcv", ModelKind::RCV}}) {
    Decomposition d;
    if (bbox) d.entries.push_back({*bbox, kind, ""});
    layouts.emplace_back(name, d);
  }
  layouts.emplace_back("aggressive", aggressive(sheet, p));
  std::vector<FormulaRow> out;
  EngineOptions options;
  options.cacheCells = 0;
  for (const auto& [name, d] : layouts) {
    SheetEngine e(sheet, options, d);
    double best = kInfiniteCost;
    for (int i = 0; i < std::max(repeats, 1); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      e.recalculate();
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    out.push_back({name, modeledAccessCost(d, footprints, AccessParams{}), best, formulas});
  }
  return out;
}

double liveStorageCost(const SheetEngine& e, const CostParams& p) {
  return hybridCost(e.decomposition(), e.snapshot(), p);
}

std::vector<IncrementalRow> benchIncremental(const Sheet& sheet, const UpdateWorkload& w,
                                             const std::vector<double>& etas, const CostParams& p) {
  const auto script = genUpdateWorkload(w, sheet);
  std::vector<IncrementalRow> out;
  for (const double eta : etas) {
    SheetEngine e(sheet);
    OptimizeRequest first;
    first.params = p;
    e.optimizeLayout(first);
    Index batch = 0;
    for (std::size_t i = 0; i < script.ops.size();) {
      const std::size_t end = std::min(script.ops.size(), i + static_cast<std::size_t>(script.batchSize));
      for (; i < end; ++i) applyOp(e, script.ops[i]);
      IncrementalRow row;
      row.eta = eta;
      row.batch = ++batch;
      row.costBefore = liveStorageCost(e, p);
      OptimizeRequest req;
      req.params = p;
      req.eta = eta;
      const auto res = e.optimizeLayout(req);
      row.costAfter = liveStorageCost(e, p);
      row.migrated = res.migratedCells;
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace gridstore
