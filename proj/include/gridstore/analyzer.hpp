#pragma once

// Structure analysis of sheets: density, connected components, tabular
// regions, formula statistics and the per-component table-count bound.

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridstore/core.hpp"
#include "gridstore/costmodel.hpp"

namespace gridstore {

double density(const Sheet& sheet, const Region& region);

struct ComponentReport {
  std::size_t componentId = 0;
  std::vector<CellAddress> memberCells;  // sorted
  Region bbox;
  double density = 0;
  bool isTabular = false;
  Index emptyInBBox = 0;  // e
};

struct TabularRule {
  Index minCols = 2;
  Index minRows = 5;
  double minDensity = 0.7;

  bool matches(const Region& bbox, double density) const {
    return bbox.colCount() >= minCols && bbox.rowCount() >= minRows && density >= minDensity;
  }
};

/// Components of the filled cells under 4-neighbour adjacency, ordered by
/// their first cell in row-major order.
std::vector<ComponentReport> connectedComponents(const Sheet& sheet, const TabularRule& rule = {});
std::vector<ComponentReport> connectedComponents(const std::vector<CellAddress>& cells,
                                                 const TabularRule& rule = {});

std::vector<Region> tabularRegions(const Sheet& sheet, const TabularRule& rule = {});

inline constexpr Index kUnboundedTables = std::numeric_limits<Index>::max();
/// floor(e*s2/s1 + 1); kUnboundedTables when s1 == 0.
Index kBound(const ComponentReport& component, const CostParams& p);
Index kBound(Index emptyCells, const CostParams& p);

/// Number of 4-connected pieces in the union of `regions`.
std::size_t regionComponents(const std::vector<Region>& regions);

struct SheetStats {
  std::string sheet;
  std::size_t filled = 0;
  std::size_t formulae = 0;
  double density = 0;  // 0 for an empty sheet
  std::size_t tables = 0;
  std::optional<double> tabularCoverage;  // fraction of filled cells
  std::optional<double> cellsPerFormula;
  std::optional<double> regionsPerFormula;
};

struct CorpusSummary {
  std::size_t sheets = 0;
  std::optional<double> sheetsWithFormulae;       // fraction
  std::optional<double> sheetsOver20PctFormulae;  // fraction
  std::optional<double> formulaCoverage;          // formulae / filled
  std::optional<double> sheetsDensityBelow50;
  std::optional<double> sheetsDensityBelow20;
  std::size_t tables = 0;
  std::optional<double> tabularCoverage;
  std::optional<double> cellsPerFormula;
  std::optional<double> regionsPerFormula;
};

struct CorpusStats {
  std::vector<SheetStats> perSheet;
  CorpusSummary summary;
};

struct NamedSheet {
  std::string name;
  const Sheet* sheet = nullptr;
};

SheetStats sheetStats(const std::string& name, const Sheet& sheet, const TabularRule& rule = {});
CorpusStats corpusStats(const std::vector<NamedSheet>& sheets, const TabularRule& rule = {});
/// Header, one row per sheet, then a summary row named "*". Absent metrics
/// are written as empty fields.
void writeCorpusCsv(std::ostream& out, const CorpusStats& stats);

}  // namespace gridstore
