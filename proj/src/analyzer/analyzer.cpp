#include "gridstore/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "gridstore/formula.hpp"

namespace gridstore {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::optional<double> ratio(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

}  // namespace

double density(const Sheet& sheet, const Region& region) {
  return static_cast<double>(sheet.countIn(region)) / static_cast<double>(region.area());
}

std::vector<ComponentReport> connectedComponents(const std::vector<CellAddress>& input,
                                                 const TabularRule& rule) {
  std::vector<CellAddress> cells = input;
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  DisjointSets ds(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellAddress a = cells[i];
    if (i + 1 < cells.size() && cells[i + 1] == CellAddress{a.row, a.col + 1}) ds.unite(i, i + 1);
    const CellAddress below{a.row + 1, a.col};
    const auto it = std::lower_bound(cells.begin(), cells.end(), below);
    if (it != cells.end() && *it == below) ds.unite(i, static_cast<std::size_t>(it - cells.begin()));
  }
  std::vector<ComponentReport> out;
  std::vector<std::size_t> slot(cells.size(), SIZE_MAX);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t root = ds.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = out.size();
      ComponentReport rep;
      rep.componentId = out.size();
      rep.bbox = Region::cell(cells[i]);
      out.push_back(std::move(rep));
    }
    auto& rep = out[slot[root]];
    rep.memberCells.push_back(cells[i]);
    rep.bbox.top = std::min(rep.bbox.top, cells[i].row);
    rep.bbox.bottom = std::max(rep.bbox.bottom, cells[i].row);
    rep.bbox.left = std::min(rep.bbox.left, cells[i].col);
    rep.bbox.right = std::max(rep.bbox.right, cells[i].col);
  }
  for (auto& rep : out) {
    const auto n = static_cast<Index>(rep.memberCells.size());
    rep.density = static_cast<double>(n) / static_cast<double>(rep.bbox.area());
    rep.emptyInBBox = rep.bbox.area() - n;
    rep.isTabular = rule.matches(rep.bbox, rep.density);
  }
  return out;
}

std::vector<ComponentReport> connectedComponents(const Sheet& sheet, const TabularRule& rule) {
  std::vector<CellAddress> cells;
  cells.reserve(sheet.size());
  for (const auto& [a, c] : sheet.cells()) cells.push_back(a);
  return connectedComponents(cells, rule);
}

std::vector<Region> tabularRegions(const Sheet& sheet, const TabularRule& rule) {
  std::vector<Region> out;
  for (const auto& c : connectedComponents(sheet, rule)) {
    if (c.isTabular) out.push_back(c.bbox);
  }
  return out;
}

Index kBound(Index emptyCells, const CostParams& p) {
  if (p.s1 <= 0) return kUnboundedTables;
  return static_cast<Index>(std::floor(static_cast<double>(emptyCells) * p.s2 / p.s1 + 1));
}

Index kBound(const ComponentReport& component, const CostParams& p) {
  return kBound(component.emptyInBBox, p);
}

std::size_t regionComponents(const std::vector<Region>& regions) {
  DisjointSets ds(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& a = regions[i];
    const Region tall{a.top - 1, a.left, a.bottom + 1, a.right};
    const Region wide{a.top, a.left - 1, a.bottom, a.right + 1};
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      if (tall.intersects(regions[j]) || wide.intersects(regions[j])) ds.unite(i, j);
    }
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) n += ds.find(i) == i;
  return n;
}

SheetStats sheetStats(const std::string& name, const Sheet& sheet, const TabularRule& rule) {
  SheetStats st;
  st.sheet = name;
  st.filled = sheet.size();
  if (const auto box = boundingBox(sheet)) st.density = density(sheet, *box);
  std::size_t tabularCells = 0;
  for (const auto& c : connectedComponents(sheet, rule)) {
    if (!c.isTabular) continue;
    ++st.tables;
    tabularCells += c.memberCells.size();
  }
  st.tabularCoverage = ratio(static_cast<double>(tabularCells), static_cast<double>(st.filled));
  double cells = 0;
  double regions = 0;
  for (const auto& [a, c] : sheet.cells()) {
    const auto* f = std::get_if<Formula>(&c);
    if (!f) continue;
    ++st.formulae;
    const auto fp = accessFootprint(*f->expr);
    cells += static_cast<double>(fp.cellCount);
    regions += static_cast<double>(regionComponents(fp.regions));
  }
  st.cellsPerFormula = ratio(cells, static_cast<double>(st.formulae));
  st.regionsPerFormula = ratio(regions, static_cast<double>(st.formulae));
  return st;
}

CorpusStats corpusStats(const std::vector<NamedSheet>& sheets, const TabularRule& rule) {
  CorpusStats out;
  auto& s = out.summary;
  s.sheets = sheets.size();
  double withFormulae = 0, over20 = 0, below50 = 0, below20 = 0;
  double filled = 0, formulae = 0, tabular = 0, cells = 0, regions = 0;
  for (const auto& ns : sheets) {
    auto st = sheetStats(ns.name, *ns.sheet, rule);
    withFormulae += st.formulae > 0;
    over20 += st.filled > 0 && static_cast<double>(st.formulae) > 0.2 * static_cast<double>(st.filled);
    below50 += st.density < 0.5;
    below20 += st.density < 0.2;
    filled += static_cast<double>(st.filled);
    formulae += static_cast<double>(st.formulae);
    tabular += st.tabularCoverage.value_or(0) * static_cast<double>(st.filled);
    cells += st.cellsPerFormula.value_or(0) * static_cast<double>(st.formulae);
    regions += st.regionsPerFormula.value_or(0) * static_cast<double>(st.formulae);
    s.tables += st.tables;
    out.perSheet.push_back(std::move(st));
  }
  const double n = static_cast<double>(s.sheets);
  s.sheetsWithFormulae = ratio(withFormulae, n);
  s.sheetsOver20PctFormulae = ratio(over20, n);
  s.sheetsDensityBelow50 = ratio(below50, n);
  s.sheetsDensityBelow20 = ratio(below20, n);
  s.formulaCoverage = ratio(formulae, filled);
  s.tabularCoverage = ratio(tabular, filled);
  s.cellsPerFormula = ratio(cells, formulae);
  s.regionsPerFormula = ratio(regions, formulae);
  return out;
}

void writeCorpusCsv(std::ostream& out, const CorpusStats& stats) {
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "sheet,filled,formulae,density,tabular_coverage,cells_per_formula,regions_per_formula\n";
  std::size_t filled = 0, formulae = 0;
  for (const auto& st : stats.perSheet) {
    out << st.sheet << ',' << st.filled << ',' << st.formulae << ',' << st.density << ','
        << opt(st.tabularCoverage) << ',' << opt(st.cellsPerFormula) << ','
        << opt(st.regionsPerFormula) << '\n';
    filled += st.filled;
    formulae += st.formulae;
  }
  std::optional<double> meanDensity;
  if (!stats.perSheet.empty()) {
    double d = 0;
    for (const auto& st : stats.perSheet) d += st.density;
    meanDensity = d / static_cast<double>(stats.perSheet.size());
  }
  const auto& s = stats.summary;
  out << "*," << filled << ',' << formulae << ',' << opt(meanDensity) << ',' << opt(s.tabularCoverage)
      << ',' << opt(s.cellsPerFormula) << ',' << opt(s.regionsPerFormula) << '\n';
}

}  // namespace gridstore
