#pragma once

// Physical layout optimizer: recursive-cut dynamic programming (dense and
// weighted), greedy and aggressive greedy heuristics, incremental
// re-decomposition with migration cost, and brute-force oracles.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridstore/core.hpp"
#include "gridstore/costmodel.hpp"

namespace gridstore {

struct PinnedTable {
  Region region;
  std::string table;
};

struct Constraints {
  std::vector<PinnedTable> pinnedTom;
  std::optional<Index> maxTableCols;
};

/// Thrown when the DP memo would exceed the configured state budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecomposeOptions {
  /// Upper bound on memoized subrectangles (R^2 * C^2 of the grid).
  std::uint64_t dpStateBudget = std::uint64_t{1} << 24;
  /// Grids above this many cells are collapsed into weighted runs before
  /// running greedy or aggressive.
  std::uint64_t denseGridLimit = std::uint64_t{1} << 22;
  /// Only ROM is considered for an undivided region (the narrow reading).
  bool romOnly = false;
};

/// Rows and columns of the grid an optimizer works on. Each grid row/column
/// is a run of identical original rows/columns.
struct WeightedGrid {
  struct Run {
    Index start = 1;   // first original index
    Index weight = 1;  // run length
  };
  std::vector<Run> rowRuns;
  std::vector<Run> colRuns;

  Index originalRows() const;
  Index originalCols() const;
};

/// Adjacent rows (columns) with the same filled pattern, and the same
/// pinned-table / existing-entry membership, collapse into one weighted run.
WeightedGrid buildWeightedGrid(const Sheet& sheet, const Constraints& c = {},
                               const Decomposition* existing = nullptr);

Decomposition dpOptimal(const Sheet& sheet, const CostParams& p, const Constraints& c = {},
                        const DecomposeOptions& o = {});
Decomposition dpWeighted(const Sheet& sheet, const CostParams& p, const Constraints& c = {},
                         const DecomposeOptions& o = {});
Decomposition greedy(const Sheet& sheet, const CostParams& p, const Constraints& c = {},
                     const DecomposeOptions& o = {});
Decomposition aggressive(const Sheet& sheet, const CostParams& p, const Constraints& c = {},
                         const DecomposeOptions& o = {});

enum class Algorithm { DP, Weighted, Greedy, Aggressive };
std::string_view algorithmName(Algorithm a);
Algorithm parseAlgorithm(std::string_view s);
Decomposition decompose(Algorithm a, const Sheet& sheet, const CostParams& p,
                        const Constraints& c = {}, const DecomposeOptions& o = {});

struct IncrementalConfig {
  double eta = 0;  // +infinity keeps the existing decomposition
  Decomposition existing;
  Algorithm algorithm = Algorithm::Aggressive;
};

struct IncrementalResult {
  Decomposition decomposition;
  Index migratedCells = 0;
  double storageCost = 0;
};

/// Re-optimizes with an extra per-region option of reusing an existing table
/// (exact region and kind) at no migration; any other placement pays
/// eta per filled cell moved. With eta > 0 the result never stores more
/// than keeping the existing layout (new cells in RCV) would.
IncrementalResult incremental(const Sheet& sheet, const CostParams& p, const IncrementalConfig& cfg,
                              const Constraints& c = {}, const DecomposeOptions& o = {});

/// Filled cells that move when `existing` is replaced by `next`: ROM/COM
/// entries not matching an existing entry exactly (region and kind) move all
/// their cells; RCV entries move the cells that previously sat in a table.
Index migrationCount(const Sheet& sheet, const Decomposition& next, const Decomposition& existing);

/// The existing entries plus RCV entries for filled cells they do not cover.
Decomposition keepExisting(const Sheet& sheet, const Decomposition& existing);

/// Unmemoized recursion over every cut sequence; masks up to 5x5.
double exhaustiveCutOracle(const OccupancyMask& mask, const CostParams& p);

struct PartitionOptimum {
  double cost = 0;
  int k = 0;  // non-empty rectangles in the optimal partition
};
/// Optimum over all partitions of the mask into rectangles (each priced at
/// its cheapest model, empty rectangles free); masks up to 4x4. Among equal
/// costs the partition with the fewest non-empty rectangles is reported.
PartitionOptimum exhaustivePartitionOracle(const OccupancyMask& mask, const CostParams& p);

struct RecoverabilityReport {
  bool ok = true;
  std::string message;
  std::optional<CellAddress> cell;
};
RecoverabilityReport validateRecoverability(const Decomposition& d, const Sheet& sheet,
                                            const Constraints& c = {});

/// {"entries":[{top,left,bottom,right,kind,table}],"cost","algorithm","elapsed_ms"}
std::string decompositionJson(const Decomposition& d, double cost, double elapsedMs);
Decomposition decompositionFromJson(const std::string& json);

}  // namespace gridstore
