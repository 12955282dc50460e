#pragma once

// Storage and access cost formulas for ROM, COM, RCV and TOM tables, the
// hybrid (decomposition) cost, and the single-table tuple-shape analysis.

#include <limits>
#include <optional>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

#include "gridstore/core.hpp"

namespace gridstore {

/// Storage constants, all in bytes (fractions allowed).
struct CostParams {
  double s1 = 0;  // per table
  double s2 = 0;  // per cell slot (empty or not) of a ROM/COM table
  double s3 = 0;  // per column
  double s4 = 0;  // per row
  double s5 = 0;  // per RCV tuple

  bool operator==(const CostParams&) const = default;
};

/// PostgreSQL-calibrated constants: 8 KB per table, 1 bit per cell slot,
/// 40 B per column, 50 B per row, 52 B per RCV tuple.
CostParams pgParams();
/// Ideal engine: table cost = cells + length + breadth; RCV tuple = 3 units.
CostParams idealParams();
/// s1..s4 = 1, s5 = 3.
CostParams unitParams();

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

enum class ModelKind { ROM, COM, RCV, TOM };
std::string_view kindName(ModelKind k);
ModelKind parseKind(std::string_view s);

double romCost(Index rows, Index cols, const CostParams& p);
double comCost(Index rows, Index cols, const CostParams& p);
double rcvCost(Index filledCells, const CostParams& p);

struct DecompositionEntry {
  Region region;
  ModelKind kind = ModelKind::ROM;
  std::string table;  // linked table name for TOM, empty otherwise

  bool operator==(const DecompositionEntry&) const = default;
};

struct Decomposition {
  std::vector<DecompositionEntry> entries;
  std::string algorithm;

  bool operator==(const Decomposition& o) const { return entries == o.entries; }
};

/// Indices of some pair of intersecting entries, if any.
std::optional<std::pair<std::size_t, std::size_t>> findOverlap(
    const std::vector<DecompositionEntry>& entries);

/// Storage cost of a decomposition: ROM/COM per region, RCV at s5 per filled
/// cell (one shared table), TOM free. Throws std::invalid_argument when the
/// decomposition is not recoverable for `sheet`.
double hybridCost(const Decomposition& d, const Sheet& sheet, const CostParams& p);

/// Access weights in abstract time units.
struct AccessParams {
  double tableTouchCost = 100;
  double tupleFetchCost = 10;
  double cellTransferCost = 1;
};

/// Modeled cost of reading each footprint region through `d`: distinct
/// tables touched, tuples intersected (ROM rows, COM columns, RCV cells) and
/// cells materialized at full tuple width.
double modeledAccessCost(const Decomposition& d, const std::vector<Region>& footprints,
                         const AccessParams& a);

/// Counts of cell, row and column lookups, and the seek-vs-transfer weight.
struct WorkloadProfile {
  double n1 = 0;
  double n2 = 0;
  double n3 = 0;
  double k = 0.5;
};

struct AccessEstimate {
  double seeks = 0;     // D_S
  double transfer = 0;  // D_T, in cells
};

/// Seeks and transfer for an m x n sheet stored as p x q tuples.
AccessEstimate estimateAccess(Index m, Index n, Index p, Index q, const WorkloadProfile& w);
double tupleShapeObjective(Index m, Index n, Index p, Index q, const WorkloadProfile& w);

struct TupleShape {
  Index p = 1;
  Index q = 1;
  double objective = 0;
};
/// Exhaustive search over 1 <= p <= m, 1 <= q <= n; ties go to smaller p*q,
/// then smaller p.
TupleShape tupleShapeOptimize(Index m, Index n, const WorkloadProfile& w);

/// key=value text (s1..s5, table_touch, tuple_fetch, cell_transfer); '#'
/// starts a comment. Unknown keys are an error.
struct CostConfig {
  CostParams storage;
  AccessParams access;
};
CostConfig parseCostConfig(std::string_view text, CostConfig base = {});
CostConfig loadCostConfig(const std::string& path, CostConfig base = {});

}  // namespace gridstore
