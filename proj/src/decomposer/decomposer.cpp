#include "gridstore/decomposer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace gridstore {

namespace {

constexpr double kInf = kInfiniteCost;
constexpr std::uint64_t kGridCellLimit = std::uint64_t{1} << 24;

unsigned kindBit(ModelKind k) { return 1U << static_cast<unsigned>(k); }

// Grid-level view of one optimization instance. Grid rows/columns are runs
// of original rows/columns; all sums are over original cells.
struct Problem {
  CostParams p;
  std::optional<Index> maxCols;
  bool romOnly = false;
  WeightedGrid grid;
  Index R = 0;
  Index C = 0;
  std::vector<Index> rowPre;  // original rows before grid row i
  std::vector<Index> colPre;
  std::vector<std::int64_t> filled;  // 2-D prefix sums, (R+1) x (C+1)
  std::vector<std::int64_t> pinned;  // empty when nothing is pinned
  std::vector<std::int64_t> inRcv;   // incremental only
  bool incremental = false;
  double eta = 0;
  std::map<Region, unsigned> existing;  // exact region -> kinds
  std::vector<PinnedTable> pins;

  std::int64_t sum(const std::vector<std::int64_t>& pre, Index i1, Index j1, Index i2,
                   Index j2) const {
    const auto at = [&](Index i, Index j) { return pre[static_cast<std::size_t>(i * (C + 1) + j)]; };
    return at(i2 + 1, j2 + 1) - at(i1, j2 + 1) - at(i2 + 1, j1) + at(i1, j1);
  }

  Region original(Index i1, Index j1, Index i2, Index j2) const {
    return {grid.rowRuns[i1].start, grid.colRuns[j1].start,
            grid.rowRuns[i2].start + grid.rowRuns[i2].weight - 1,
            grid.colRuns[j2].start + grid.colRuns[j2].weight - 1};
  }
};

struct Choice {
  double cost = 0;
  ModelKind kind = ModelKind::ROM;
};

// Cheapest undivided model for a region; cost 0 when nothing is filled.
Choice local(const Problem& pb, Index i1, Index j1, Index i2, Index j2) {
  const std::int64_t f = pb.sum(pb.filled, i1, j1, i2, j2);
  if (f == 0) return {0, ModelKind::RCV};
  if (!pb.pinned.empty() && pb.sum(pb.pinned, i1, j1, i2, j2) > 0) return {kInf, ModelKind::ROM};
  const Index rows = pb.rowPre[i2 + 1] - pb.rowPre[i1];
  const Index cols = pb.colPre[j2 + 1] - pb.colPre[j1];
  double rom = romCost(rows, cols, pb.p);
  double com = comCost(rows, cols, pb.p);
  double rcv = rcvCost(f, pb.p);
  if (pb.maxCols) {
    if (cols > *pb.maxCols) rom = kInf;
    if (rows > *pb.maxCols) com = kInf;
  }
  if (pb.romOnly) com = rcv = kInf;
  if (pb.incremental) {
    unsigned kinds = 0;
    if (const auto it = pb.existing.find(pb.original(i1, j1, i2, j2)); it != pb.existing.end()) {
      kinds = it->second;
    }
    const double moved = pb.eta * static_cast<double>(f);
    if (!(kinds & kindBit(ModelKind::ROM))) rom += moved;
    if (!(kinds & kindBit(ModelKind::COM))) com += moved;
    rcv += pb.eta * static_cast<double>(f - pb.sum(pb.inRcv, i1, j1, i2, j2));
  }
  Choice best{rom, ModelKind::ROM};
  if (com < best.cost) best = {com, ModelKind::COM};
  if (rcv < best.cost) best = {rcv, ModelKind::RCV};
  return best;
}

struct Extent {
  Index top = 0, left = 0, bottom = -1, right = -1;
  bool empty() const { return bottom < top; }
  void add(const Region& r) {
    if (empty()) {
      top = r.top, left = r.left, bottom = r.bottom, right = r.right;
      return;
    }
    top = std::min(top, r.top);
    left = std::min(left, r.left);
    bottom = std::max(bottom, r.bottom);
    right = std::max(right, r.right);
  }
};

std::vector<WeightedGrid::Run> makeRuns(Index first, Index last, bool collapse, Index cap,
                                        const std::function<bool(Index)>& sameAsPrevious) {
  std::vector<WeightedGrid::Run> runs;
  for (Index i = first; i <= last; ++i) {
    // Always consult the predicate so stateful comparators stay in step.
    const bool same = collapse && i > first && sameAsPrevious(i);
    if (same && runs.back().weight < cap) {
      ++runs.back().weight;
    } else {
      runs.push_back({i, 1});
    }
  }
  return runs;
}

struct GridInputs {
  const Sheet* sheet = nullptr;
  std::vector<Region> rects;  // pinned regions, then existing non-RCV entries
  Extent extent;
};

GridInputs gather(const Sheet& sheet, const Constraints& c, const Decomposition* existing) {
  GridInputs in;
  in.sheet = &sheet;
  if (const auto box = boundingBox(sheet)) in.extent.add(*box);
  for (const auto& pin : c.pinnedTom) {
    in.rects.push_back(pin.region);
    in.extent.add(pin.region);
  }
  if (existing) {
    for (const auto& e : existing->entries) {
      if (e.kind == ModelKind::RCV) continue;
      in.rects.push_back(e.region);
      in.extent.add(e.region);
    }
  }
  return in;
}

WeightedGrid runsFor(const GridInputs& in, bool collapse, Index cap) {
  WeightedGrid g;
  if (in.extent.empty()) return g;
  const Extent& x = in.extent;
  const auto& cells = in.sheet->cells();

  // Rows: compare filled-column lists and rectangle membership.
  std::vector<Index> prevCols, curCols;
  auto cellIt = cells.lower_bound({x.top, 1});
  auto rowCols = [&](Index row, std::vector<Index>& out) {
    out.clear();
    while (cellIt != cells.end() && cellIt->first.row < row) ++cellIt;
    while (cellIt != cells.end() && cellIt->first.row == row) {
      out.push_back(cellIt->first.col);
      ++cellIt;
    }
  };
  auto rowRects = [&](Index row) {
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < in.rects.size(); ++k) {
      if (in.rects[k].top <= row && row <= in.rects[k].bottom) ids.push_back(k);
    }
    return ids;
  };
  if (collapse) {
    std::vector<std::size_t> prevRects, curRects;
    rowCols(x.top, prevCols);
    prevRects = rowRects(x.top);
    g.rowRuns = makeRuns(x.top, x.bottom, true, cap, [&](Index row) {
      rowCols(row, curCols);
      curRects = rowRects(row);
      const bool same = curCols == prevCols && curRects == prevRects;
      std::swap(prevCols, curCols);
      std::swap(prevRects, curRects);
      return same;
    });
  } else {
    g.rowRuns = makeRuns(x.top, x.bottom, false, cap, {});
  }

  if (collapse) {
    const std::size_t width = static_cast<std::size_t>(x.right - x.left + 1);
    std::vector<std::vector<Index>> colRows(width);
    for (auto it = cells.lower_bound({x.top, 1}); it != cells.end(); ++it) {
      colRows[static_cast<std::size_t>(it->first.col - x.left)].push_back(it->first.row);
    }
    auto colRects = [&](Index col) {
      std::vector<std::size_t> ids;
      for (std::size_t k = 0; k < in.rects.size(); ++k) {
        if (in.rects[k].left <= col && col <= in.rects[k].right) ids.push_back(k);
      }
      return ids;
    };
    g.colRuns = makeRuns(x.left, x.right, true, cap, [&](Index col) {
      const auto i = static_cast<std::size_t>(col - x.left);
      return colRows[i] == colRows[i - 1] && colRects(col) == colRects(col - 1);
    });
  } else {
    g.colRuns = makeRuns(x.left, x.right, false, cap, {});
  }
  return g;
}

std::vector<std::int64_t> prefix(const std::vector<std::int64_t>& grid, Index R, Index C) {
  std::vector<std::int64_t> pre(static_cast<std::size_t>((R + 1) * (C + 1)), 0);
  for (Index i = 0; i < R; ++i) {
    std::int64_t row = 0;
    for (Index j = 0; j < C; ++j) {
      row += grid[static_cast<std::size_t>(i * C + j)];
      pre[static_cast<std::size_t>((i + 1) * (C + 1) + j + 1)] =
          pre[static_cast<std::size_t>(i * (C + 1) + j + 1)] + row;
    }
  }
  return pre;
}

Index runIndex(const std::vector<WeightedGrid::Run>& runs, Index original) {
  const auto it = std::upper_bound(runs.begin(), runs.end(), original,
                                   [](Index v, const WeightedGrid::Run& r) { return v < r.start; });
  return static_cast<Index>(it - runs.begin()) - 1;
}

void validateConstraints(const Constraints& c) {
  for (std::size_t i = 0; i < c.pinnedTom.size(); ++i) {
    if (!c.pinnedTom[i].region.valid()) throw std::invalid_argument("invalid pinned region");
    if (c.pinnedTom[i].table.empty()) throw std::invalid_argument("pinned region needs a table name");
    for (std::size_t j = i + 1; j < c.pinnedTom.size(); ++j) {
      if (c.pinnedTom[i].region.intersects(c.pinnedTom[j].region)) {
        throw std::invalid_argument("pinned regions overlap");
      }
    }
  }
  if (c.maxTableCols && *c.maxTableCols < 1) throw std::invalid_argument("maxTableCols must be >= 1");
}

Problem makeProblem(const Sheet& sheet, const CostParams& p, const Constraints& c,
                    const DecomposeOptions& o, bool collapse, const Decomposition* existing = nullptr,
                    double eta = 0) {
  validateConstraints(c);
  Problem pb;
  pb.p = p;
  pb.maxCols = c.maxTableCols;
  pb.romOnly = o.romOnly;
  pb.pins = c.pinnedTom;
  const GridInputs in = gather(sheet, c, existing);
  const Index cap = c.maxTableCols ? *c.maxTableCols : std::numeric_limits<Index>::max();
  pb.grid = runsFor(in, collapse, cap);
  pb.R = static_cast<Index>(pb.grid.rowRuns.size());
  pb.C = static_cast<Index>(pb.grid.colRuns.size());
  if (static_cast<std::uint64_t>(pb.R) * static_cast<std::uint64_t>(pb.C) > kGridCellLimit) {
    throw BudgetExceeded("grid of " + std::to_string(pb.R) + "x" + std::to_string(pb.C) +
                         " cells is too large");
  }
  pb.rowPre.assign(static_cast<std::size_t>(pb.R + 1), 0);
  pb.colPre.assign(static_cast<std::size_t>(pb.C + 1), 0);
  for (Index i = 0; i < pb.R; ++i) pb.rowPre[i + 1] = pb.rowPre[i] + pb.grid.rowRuns[i].weight;
  for (Index j = 0; j < pb.C; ++j) pb.colPre[j + 1] = pb.colPre[j] + pb.grid.colRuns[j].weight;

  const std::size_t n = static_cast<std::size_t>(pb.R * pb.C);
  std::vector<std::int64_t> filled(n, 0);
  for (const auto& [a, content] : sheet.cells()) {
    const Index i = runIndex(pb.grid.rowRuns, a.row);
    const Index j = runIndex(pb.grid.colRuns, a.col);
    ++filled[static_cast<std::size_t>(i * pb.C + j)];
  }
  auto mark = [&](const Region& r, std::vector<std::int64_t>& grid, std::int64_t v) {
    const Index i1 = runIndex(pb.grid.rowRuns, r.top), i2 = runIndex(pb.grid.rowRuns, r.bottom);
    const Index j1 = runIndex(pb.grid.colRuns, r.left), j2 = runIndex(pb.grid.colRuns, r.right);
    for (Index i = i1; i <= i2; ++i) {
      for (Index j = j1; j <= j2; ++j) grid[static_cast<std::size_t>(i * pb.C + j)] = v;
    }
  };
  if (!c.pinnedTom.empty()) {
    std::vector<std::int64_t> pins(n, 0);
    for (const auto& pin : c.pinnedTom) mark(pin.region, pins, 1);
    // Pinned cells belong to their linked table and are empty to the optimizer.
    for (std::size_t k = 0; k < n; ++k) {
      if (pins[k]) filled[k] = 0;
    }
    pb.pinned = prefix(pins, pb.R, pb.C);
  }
  if (existing) {
    pb.incremental = true;
    pb.eta = eta;
    std::vector<std::int64_t> covered(n, 0);
    for (const auto& e : existing->entries) {
      pb.existing[e.region] |= kindBit(e.kind);
      if (e.kind != ModelKind::RCV) mark(e.region, covered, 1);
    }
    std::vector<std::int64_t> rcv(n, 0);
    for (std::size_t k = 0; k < n; ++k) rcv[k] = covered[k] ? 0 : filled[k];
    pb.inRcv = prefix(rcv, pb.R, pb.C);
  }
  pb.filled = prefix(filled, pb.R, pb.C);
  return pb;
}

void emitLocal(const Problem& pb, Index i1, Index j1, Index i2, Index j2, const Choice& ch,
               std::vector<DecompositionEntry>& out) {
  out.push_back({pb.original(i1, j1, i2, j2), ch.kind, ""});
}

Decomposition finish(const Problem& pb, std::vector<DecompositionEntry> entries, std::string algo) {
  for (const auto& pin : pb.pins) entries.push_back({pin.region, ModelKind::TOM, pin.table});
  return {std::move(entries), std::move(algo)};
}

// ---- Dynamic programming over all subrectangles -------------------------

class DpSolver {
 public:
  DpSolver(const Problem& pb, const DecomposeOptions& o) : pb_(pb) {
    const std::uint64_t r = static_cast<std::uint64_t>(pb.R);
    const std::uint64_t c = static_cast<std::uint64_t>(pb.C);
    if (r * r * c * c > o.dpStateBudget) {
      throw BudgetExceeded("DP over a " + std::to_string(r) + "x" + std::to_string(c) +
                           " grid exceeds the state budget; use the weighted DP or a greedy algorithm");
    }
    memo_.assign(static_cast<std::size_t>(r * c * r * c), 0.0);
  }

  std::vector<DecompositionEntry> solve() {
    std::vector<DecompositionEntry> out;
    if (pb_.R == 0) return out;
    const Index R = pb_.R, C = pb_.C;
    for (Index h = 1; h <= R; ++h) {
      for (Index w = 1; w <= C; ++w) {
        for (Index i1 = 0; i1 + h <= R; ++i1) {
          for (Index j1 = 0; j1 + w <= C; ++j1) {
            memo_[id(i1, j1, h, w)] = evaluate(i1, j1, h, w, nullptr);
          }
        }
      }
    }
    reconstruct(0, 0, R, C, out);
    return out;
  }

  double rootCost() const { return pb_.R == 0 ? 0 : memo_[id(0, 0, pb_.R, pb_.C)]; }

 private:
  struct Cut {
    bool horizontal = true;
    Index at = 0;
  };

  std::size_t id(Index i1, Index j1, Index h, Index w) const {
    return static_cast<std::size_t>((((h - 1) * pb_.C + (w - 1)) * pb_.R + i1) * pb_.C + j1);
  }

  // Ties: no split, then horizontal cuts, then vertical, lowest index first.
  double evaluate(Index i1, Index j1, Index h, Index w, std::optional<Cut>* cut) const {
    const Index i2 = i1 + h - 1, j2 = j1 + w - 1;
    if (pb_.sum(pb_.filled, i1, j1, i2, j2) == 0) return 0;
    double best = local(pb_, i1, j1, i2, j2).cost;
    for (Index k = 1; k < h; ++k) {
      const double v = memo_[id(i1, j1, k, w)] + memo_[id(i1 + k, j1, h - k, w)];
      if (v < best) {
        best = v;
        if (cut) *cut = Cut{true, k};
      }
    }
    for (Index k = 1; k < w; ++k) {
      const double v = memo_[id(i1, j1, h, k)] + memo_[id(i1, j1 + k, h, w - k)];
      if (v < best) {
        best = v;
        if (cut) *cut = Cut{false, k};
      }
    }
    return best;
  }

  void reconstruct(Index i1, Index j1, Index h, Index w, std::vector<DecompositionEntry>& out) const {
    const Index i2 = i1 + h - 1, j2 = j1 + w - 1;
    if (pb_.sum(pb_.filled, i1, j1, i2, j2) == 0) return;
    std::optional<Cut> cut;
    evaluate(i1, j1, h, w, &cut);
    if (!cut) {
      emitLocal(pb_, i1, j1, i2, j2, local(pb_, i1, j1, i2, j2), out);
    } else if (cut->horizontal) {
      reconstruct(i1, j1, cut->at, w, out);
      reconstruct(i1 + cut->at, j1, h - cut->at, w, out);
    } else {
      reconstruct(i1, j1, h, cut->at, out);
      reconstruct(i1, j1 + cut->at, h, w - cut->at, out);
    }
  }

  const Problem& pb_;
  std::vector<double> memo_;
};

// ---- Greedy and aggressive greedy ---------------------------------------

struct CutChoice {
  bool horizontal = true;
  Index at = 0;
  double cost = kInf;
};

// Best single cut with both halves priced at their cheapest undivided model.
// When every cut is infinite the first cut is returned so recursion can
// still separate pinned cells.
// Smallest grid subregion holding every filled cell of g (g itself if empty).
Region trimmed(const Problem& pb, const Region& g) {
  if (pb.sum(pb.filled, g.top, g.left, g.bottom, g.right) == 0) return g;
  auto first = [](Index lo, Index hi, const std::function<bool(Index)>& ok) {
    while (lo < hi) {
      const Index mid = lo + (hi - lo) / 2;
      if (ok(mid)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  };
  Region t = g;
  t.top = first(g.top, g.bottom, [&](Index i) { return pb.sum(pb.filled, g.top, g.left, i, g.right) > 0; });
  t.bottom = g.bottom - first(0, g.bottom - t.top, [&](Index k) {
                          return pb.sum(pb.filled, g.bottom - k, g.left, g.bottom, g.right) > 0;
                        });
  t.left = first(g.left, g.right, [&](Index j) { return pb.sum(pb.filled, t.top, g.left, t.bottom, j) > 0; });
  t.right = g.right - first(0, g.right - t.left, [&](Index k) {
                        return pb.sum(pb.filled, t.top, g.right - k, t.bottom, g.right) > 0;
                      });
  return t;
}

// Cheapest undivided placement of g: the region itself or its filled extent.
std::pair<Region, Choice> settle(const Problem& pb, const Region& g) {
  const Region t = trimmed(pb, g);
  const Choice ct = local(pb, t.top, t.left, t.bottom, t.right);
  if (t == g) return {t, ct};
  const Choice cg = local(pb, g.top, g.left, g.bottom, g.right);
  return cg.cost < ct.cost ? std::pair{g, cg} : std::pair{t, ct};
}

std::optional<CutChoice> bestCut(const Problem& pb, Index i1, Index j1, Index i2, Index j2) {
  std::optional<CutChoice> best;
  auto consider = [&](bool horizontal, Index at, double v) {
    if (!best || v < best->cost) best = CutChoice{horizontal, at, v};
  };
  auto price = [&](Index a1, Index b1, Index a2, Index b2) {
    return settle(pb, {a1, b1, a2, b2}).second.cost;
  };
  for (Index k = 1; k <= i2 - i1; ++k) {
    consider(true, k, price(i1, j1, i1 + k - 1, j2) + price(i1 + k, j1, i2, j2));
  }
  for (Index k = 1; k <= j2 - j1; ++k) {
    consider(false, k, price(i1, j1, i2, j1 + k - 1) + price(i1, j1 + k, i2, j2));
  }
  return best;
}

void halves(const CutChoice& c, Index i1, Index j1, Index i2, Index j2, Region& a, Region& b) {
  if (c.horizontal) {
    a = {i1, j1, i1 + c.at - 1, j2};
    b = {i1 + c.at, j1, i2, j2};
  } else {
    a = {i1, j1, i2, j1 + c.at - 1};
    b = {i1, j1 + c.at, i2, j2};
  }
}

// Grid regions below reuse Region with 0-based grid indices.
double greedyRec(const Problem& pb, const Region& region, std::vector<DecompositionEntry>& out) {
  if (pb.sum(pb.filled, region.top, region.left, region.bottom, region.right) == 0) return 0;
  const auto [g, here] = settle(pb, region);
  const Index i1 = g.top, j1 = g.left, i2 = g.bottom, j2 = g.right;
  const auto cut = bestCut(pb, i1, j1, i2, j2);
  if (cut && (cut->cost < here.cost || here.cost == kInf)) {
    Region a, b;
    halves(*cut, i1, j1, i2, j2, a, b);
    return greedyRec(pb, a, out) + greedyRec(pb, b, out);
  }
  emitLocal(pb, i1, j1, i2, j2, here, out);
  return here.cost;
}

double aggressiveRec(const Problem& pb, const Region& region, std::vector<DecompositionEntry>& out) {
  const std::int64_t f = pb.sum(pb.filled, region.top, region.left, region.bottom, region.right);
  if (f == 0) return 0;
  const auto [g, here] = settle(pb, region);
  const Index i1 = g.top, j1 = g.left, i2 = g.bottom, j2 = g.right;
  const auto cut = bestCut(pb, i1, j1, i2, j2);
  const Index area = (pb.rowPre[i2 + 1] - pb.rowPre[i1]) * (pb.colPre[j2 + 1] - pb.colPre[j1]);
  const bool dense = f == area;
  if (!cut || (dense && cut->cost >= here.cost)) {
    emitLocal(pb, i1, j1, i2, j2, here, out);
    return here.cost;
  }
  const std::size_t mark = out.size();
  Region a, b;
  halves(*cut, i1, j1, i2, j2, a, b);
  const double children = aggressiveRec(pb, a, out) + aggressiveRec(pb, b, out);
  if (here.cost <= children) {
    out.resize(mark);
    emitLocal(pb, i1, j1, i2, j2, here, out);
    return here.cost;
  }
  return children;
}

bool useCollapse(const Sheet& sheet, const Constraints& c, const DecomposeOptions& o,
                 const Decomposition* existing) {
  const GridInputs in = gather(sheet, c, existing);
  if (in.extent.empty()) return false;
  const auto rows = static_cast<std::uint64_t>(in.extent.bottom - in.extent.top + 1);
  const auto cols = static_cast<std::uint64_t>(in.extent.right - in.extent.left + 1);
  return rows * cols > o.denseGridLimit;
}

std::vector<DecompositionEntry> runHeuristic(const Problem& pb, bool aggressiveMode) {
  std::vector<DecompositionEntry> out;
  if (pb.R == 0) return out;
  const Region root{0, 0, pb.R - 1, pb.C - 1};
  if (aggressiveMode) {
    aggressiveRec(pb, root, out);
  } else {
    greedyRec(pb, root, out);
  }
  return out;
}

Decomposition runAlgorithm(Algorithm a, const Sheet& sheet, const CostParams& p, const Constraints& c,
                           const DecomposeOptions& o, const Decomposition* existing, double eta) {
  switch (a) {
    case Algorithm::DP:
    case Algorithm::Weighted: {
      const bool collapse = a == Algorithm::Weighted && !c.maxTableCols;
      const Problem pb = makeProblem(sheet, p, c, o, collapse, existing, eta);
      DpSolver dp(pb, o);
      return finish(pb, dp.solve(), std::string(algorithmName(a)));
    }
    case Algorithm::Greedy:
    case Algorithm::Aggressive: {
      const Problem pb =
          makeProblem(sheet, p, c, o, useCollapse(sheet, c, o, existing), existing, eta);
      return finish(pb, runHeuristic(pb, a == Algorithm::Aggressive), std::string(algorithmName(a)));
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace

Index WeightedGrid::originalRows() const {
  Index n = 0;
  for (const auto& r : rowRuns) n += r.weight;
  return n;
}

Index WeightedGrid::originalCols() const {
  Index n = 0;
  for (const auto& c : colRuns) n += c.weight;
  return n;
}

WeightedGrid buildWeightedGrid(const Sheet& sheet, const Constraints& c, const Decomposition* existing) {
  return runsFor(gather(sheet, c, existing), true, std::numeric_limits<Index>::max());
}

std::string_view algorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::DP:
      return "dp";
    case Algorithm::Weighted:
      return "weighted";
    case Algorithm::Greedy:
      return "greedy";
    case Algorithm::Aggressive:
      return "aggressive";
  }
  return "?";
}

Algorithm parseAlgorithm(std::string_view s) {
  if (s == "dp") return Algorithm::DP;
  if (s == "weighted") return Algorithm::Weighted;
  if (s == "greedy") return Algorithm::Greedy;
  if (s == "aggressive") return Algorithm::Aggressive;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

Decomposition dpOptimal(const Sheet& sheet, const CostParams& p, const Constraints& c,
                        const DecomposeOptions& o) {
  return runAlgorithm(Algorithm::DP, sheet, p, c, o, nullptr, 0);
}

Decomposition dpWeighted(const Sheet& sheet, const CostParams& p, const Constraints& c,
                         const DecomposeOptions& o) {
  return runAlgorithm(Algorithm::Weighted, sheet, p, c, o, nullptr, 0);
}

Decomposition greedy(const Sheet& sheet, const CostParams& p, const Constraints& c,
                     const DecomposeOptions& o) {
  return runAlgorithm(Algorithm::Greedy, sheet, p, c, o, nullptr, 0);
}

Decomposition aggressive(const Sheet& sheet, const CostParams& p, const Constraints& c,
                         const DecomposeOptions& o) {
  return runAlgorithm(Algorithm::Aggressive, sheet, p, c, o, nullptr, 0);
}

Decomposition decompose(Algorithm a, const Sheet& sheet, const CostParams& p, const Constraints& c,
                        const DecomposeOptions& o) {
  return runAlgorithm(a, sheet, p, c, o, nullptr, 0);
}

// ---- Incremental --------------------------------------------------------

Decomposition keepExisting(const Sheet& sheet, const Decomposition& existing) {
  Decomposition keep{existing.entries, "keep"};
  std::vector<const Region*> stored;
  for (const auto& e : existing.entries) stored.push_back(&e.region);
  std::sort(stored.begin(), stored.end(),
            [](const Region* a, const Region* b) { return a->top < b->top; });
  auto covered = [&](CellAddress a) {
    for (const Region* r : stored) {
      if (r->top > a.row) break;
      if (r->contains(a)) return true;
    }
    return false;
  };
  // Uncovered cells go to RCV as maximal horizontal runs.
  std::optional<Region> run;
  for (const auto& [a, content] : sheet.cells()) {
    if (covered(a)) continue;
    if (run && run->top == a.row && run->right + 1 == a.col) {
      run->right = a.col;
      continue;
    }
    if (run) keep.entries.push_back({*run, ModelKind::RCV, ""});
    run = Region::cell(a);
  }
  if (run) keep.entries.push_back({*run, ModelKind::RCV, ""});
  return keep;
}

Index migrationCount(const Sheet& sheet, const Decomposition& next, const Decomposition& existing) {
  std::map<Region, unsigned> kinds;
  std::vector<Region> stored;
  for (const auto& e : existing.entries) {
    kinds[e.region] |= kindBit(e.kind);
    if (e.kind != ModelKind::RCV) stored.push_back(e.region);
  }
  auto inRcv = [&](CellAddress a) {
    return std::none_of(stored.begin(), stored.end(), [&](const Region& r) { return r.contains(a); });
  };
  Index moved = 0;
  for (const auto& e : next.entries) {
    if (e.kind == ModelKind::TOM) continue;
    if (e.kind == ModelKind::RCV) {
      for (auto it = sheet.cells().lower_bound({e.region.top, e.region.left});
           it != sheet.cells().end() && it->first.row <= e.region.bottom; ++it) {
        if (e.region.contains(it->first) && !inRcv(it->first)) ++moved;
      }
      continue;
    }
    const auto it = kinds.find(e.region);
    if (it == kinds.end() || !(it->second & kindBit(e.kind))) {
      moved += static_cast<Index>(sheet.countIn(e.region));
    }
  }
  return moved;
}

namespace {

double storageOf(const Decomposition& d, const Sheet& sheet, const CostParams& p,
                 const Constraints& c) {
  // Pinned cells belong to linked tables and are not priced.
  if (c.pinnedTom.empty()) return hybridCost(d, sheet, p);
  Sheet visible = sheet;
  for (const auto& pin : c.pinnedTom) {
    for (auto it = sheet.cells().lower_bound({pin.region.top, pin.region.left});
         it != sheet.cells().end() && it->first.row <= pin.region.bottom; ++it) {
      if (pin.region.contains(it->first)) visible.set(it->first, Empty{});
    }
  }
  return hybridCost(d, visible, p);
}

}  // namespace

IncrementalResult incremental(const Sheet& sheet, const CostParams& p, const IncrementalConfig& cfg,
                              const Constraints& c, const DecomposeOptions& o) {
  if (cfg.eta < 0 || std::isnan(cfg.eta)) throw std::invalid_argument("eta must be >= 0");
  IncrementalResult res;
  if (std::isinf(cfg.eta)) {
    res.decomposition = cfg.existing;
    res.decomposition.algorithm = "keep";
    try {
      res.storageCost = storageOf(keepExisting(sheet, cfg.existing), sheet, p, c);
    } catch (const std::invalid_argument&) {
      res.storageCost = kInf;
    }
    return res;
  }
  if (cfg.eta == 0) {
    res.decomposition = runAlgorithm(cfg.algorithm, sheet, p, c, o, nullptr, 0);
  } else {
    res.decomposition = runAlgorithm(cfg.algorithm, sheet, p, c, o, &cfg.existing, cfg.eta);
  }
  res.migratedCells = migrationCount(sheet, res.decomposition, cfg.existing);
  res.storageCost = storageOf(res.decomposition, sheet, p, c);
  if (cfg.eta > 0) {
    const Decomposition keep = keepExisting(sheet, cfg.existing);
    double keepCost = kInf;
    try {
      keepCost = storageOf(keep, sheet, p, c);
    } catch (const std::invalid_argument&) {
    }
    const bool honorsPins = std::none_of(keep.entries.begin(), keep.entries.end(), [&](const auto& e) {
      return e.kind != ModelKind::TOM &&
             std::any_of(c.pinnedTom.begin(), c.pinnedTom.end(),
                         [&](const PinnedTable& pin) { return pin.region.intersects(e.region); });
    });
    if (honorsPins && keepCost < kInf) {
      const double candidate = res.storageCost + cfg.eta * static_cast<double>(res.migratedCells);
      if (keepCost <= candidate) {
        res.decomposition = keep;
        res.migratedCells = 0;
        res.storageCost = keepCost;
      }
    }
  }
  return res;
}

// ---- Oracles -------------------------------------------------------------

namespace {

struct MaskGrid {
  Index rows = 0, cols = 0;
  std::vector<bool> bits;
  bool at(Index r, Index c) const { return bits[static_cast<std::size_t>(r * cols + c)]; }
};

MaskGrid toGrid(const OccupancyMask& m, Index limit) {
  if (m.rows > limit || m.cols > limit) {
    throw std::invalid_argument("mask larger than " + std::to_string(limit) + "x" + std::to_string(limit));
  }
  MaskGrid g{m.rows, m.cols, std::vector<bool>(static_cast<std::size_t>(m.rows * m.cols), false)};
  for (const auto& a : m.filled) g.bits[static_cast<std::size_t>((a.row - 1) * m.cols + a.col - 1)] = true;
  return g;
}

double cheapest(const MaskGrid& g, Index t, Index l, Index b, Index r, const CostParams& p) {
  Index n = 0;
  for (Index i = t; i <= b; ++i) {
    for (Index j = l; j <= r; ++j) n += g.at(i, j);
  }
  if (n == 0) return 0;
  const Index h = b - t + 1, w = r - l + 1;
  return std::min({romCost(h, w, p), comCost(h, w, p), rcvCost(n, p)});
}

double cutRec(const MaskGrid& g, Index t, Index l, Index b, Index r, const CostParams& p) {
  double best = cheapest(g, t, l, b, r, p);
  if (best == 0) return 0;
  for (Index i = t; i < b; ++i) best = std::min(best, cutRec(g, t, l, i, r, p) + cutRec(g, i + 1, l, b, r, p));
  for (Index j = l; j < r; ++j) best = std::min(best, cutRec(g, t, l, b, j, p) + cutRec(g, t, j + 1, b, r, p));
  return best;
}

}  // namespace

double exhaustiveCutOracle(const OccupancyMask& mask, const CostParams& p) {
  const MaskGrid g = toGrid(mask, 5);
  if (g.rows == 0 || g.cols == 0) return 0;
  return cutRec(g, 0, 0, g.rows - 1, g.cols - 1, p);
}

PartitionOptimum exhaustivePartitionOracle(const OccupancyMask& mask, const CostParams& p) {
  const MaskGrid g = toGrid(mask, 4);
  const Index n = g.rows * g.cols;
  if (n == 0) return {};
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<PartitionOptimum> best(std::size_t{1} << n);
  std::vector<bool> done(std::size_t{1} << n, false);
  best[full] = {0, 0};
  done[full] = true;
  // Fill from most-covered to least so every successor is already known.
  for (std::int64_t covered = full - 1; covered >= 0; --covered) {
    const auto cov = static_cast<std::uint32_t>(covered);
    Index first = 0;
    while (cov >> first & 1U) ++first;
    const Index r0 = first / g.cols, c0 = first % g.cols;
    PartitionOptimum here{kInf, 0};
    for (Index b = r0; b < g.rows; ++b) {
      for (Index r = c0; r < g.cols; ++r) {
        std::uint32_t bits = 0;
        bool free = true;
        bool nonEmpty = false;
        for (Index i = r0; i <= b && free; ++i) {
          for (Index j = c0; j <= r; ++j) {
            const std::uint32_t bit = std::uint32_t{1} << (i * g.cols + j);
            if (cov & bit) {
              free = false;
              break;
            }
            bits |= bit;
            nonEmpty = nonEmpty || g.at(i, j);
          }
        }
        if (!free) break;
        const auto& next = best[cov | bits];
        const PartitionOptimum cand{cheapest(g, r0, c0, b, r, p) + next.cost, next.k + (nonEmpty ? 1 : 0)};
        if (cand.cost < here.cost || (cand.cost == here.cost && cand.k < here.k)) here = cand;
      }
    }
    best[cov] = here;
  }
  return best[0];
}

RecoverabilityReport validateRecoverability(const Decomposition& d, const Sheet& sheet,
                                            const Constraints& c) {
  RecoverabilityReport rep;
  auto fail = [&](std::string msg, std::optional<CellAddress> cell = std::nullopt) {
    rep.ok = false;
    rep.message = std::move(msg);
    rep.cell = cell;
    return rep;
  };
  for (const auto& e : d.entries) {
    if (!e.region.valid()) return fail("invalid region " + formatRange(e.region));
    if (e.kind == ModelKind::TOM && e.table.empty()) {
      return fail("TOM entry " + formatRange(e.region) + " has no table name");
    }
  }
  if (const auto o = findOverlap(d.entries)) {
    const auto x = d.entries[o->first].region.intersection(d.entries[o->second].region);
    const CellAddress cell{x->top, x->left};
    return fail("entries " + formatRange(d.entries[o->first].region) + " and " +
                    formatRange(d.entries[o->second].region) + " overlap at " + formatA1(cell),
                cell);
  }
  std::vector<const DecompositionEntry*> sorted;
  for (const auto& e : d.entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->region.top < b->region.top;
  });
  for (const auto& [a, content] : sheet.cells()) {
    bool found = false;
    for (const auto* e : sorted) {
      if (e->region.top > a.row) break;
      if (e->region.contains(a)) {
        found = true;
        break;
      }
    }
    if (!found) return fail("cell " + formatA1(a) + " is not covered by any entry", a);
  }
  for (const auto& pin : c.pinnedTom) {
    const bool present = std::any_of(d.entries.begin(), d.entries.end(), [&](const auto& e) {
      return e.kind == ModelKind::TOM && e.region == pin.region && e.table == pin.table;
    });
    if (!present) return fail("pinned table " + pin.table + " at " + formatRange(pin.region) + " missing");
  }
  if (const auto box = boundingBox(sheet)) {
    for (const auto& e : d.entries) {
      if (e.kind != ModelKind::TOM && !box->contains(e.region)) {
        return fail("entry " + formatRange(e.region) + " extends beyond the bounding box " +
                    formatRange(*box));
      }
    }
  }
  return rep;
}

}  // namespace gridstore
