#pragma once

// Data presentation manager: binds a sheet's physical layout (tables keyed
// by stable row/column identifiers plus a global RCV overlay), positional
// maps, formula recomputation and linked tables.

#include <list>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridstore/core.hpp"
#include "gridstore/costmodel.hpp"
#include "gridstore/decomposer.hpp"
#include "gridstore/formula.hpp"
#include "gridstore/posmap.hpp"
#include "gridstore/relational.hpp"

namespace gridstore {

using RowId = ItemId;
using ColId = ItemId;

class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EngineOptions {
  PosMapKind posmap = PosMapKind::Hierarchical;
  std::size_t cacheCells = 65536;  // 0 disables the cell cache
};

/// Physical work counters, cumulative.
struct EngineCounters {
  std::uint64_t tupleWrites = 0;  // table tuples or RCV records created, changed or removed
  std::uint64_t tupleReads = 0;
  std::uint64_t cacheHits = 0;
};

struct ChangedCell {
  CellAddress addr;
  Value value;
};

struct OptimizeRequest {
  Algorithm algorithm = Algorithm::Aggressive;
  CostParams params = pgParams();
  /// Set for incremental re-optimization (+infinity keeps the layout).
  std::optional<double> eta;
  std::optional<Index> maxTableCols;
  DecomposeOptions options;
};

struct OptimizeResult {
  Decomposition decomposition;
  Index migratedCells = 0;
  double cost = 0;
};

/// One sheet. Not thread-safe; callers serialize mutations.
class SheetEngine {
 public:
  explicit SheetEngine(Index rows = 0, Index cols = 0, EngineOptions options = {});
  /// Imports `sheet`; without a layout every cell goes to RCV.
  explicit SheetEngine(const Sheet& sheet, EngineOptions options = {},
                       const std::optional<Decomposition>& layout = std::nullopt);
  /// Rebuilds from saved state: identifier orders, layout and cells given in
  /// display coordinates.
  SheetEngine(const Sheet& sheet, std::vector<RowId> rowIds, std::vector<ColId> colIds,
              const Decomposition& layout, EngineOptions options = {});
  ~SheetEngine();
  SheetEngine(SheetEngine&&) noexcept;
  SheetEngine& operator=(SheetEngine&&) noexcept;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::uint64_t revision() const { return revision_; }

  /// Stored content (formula cells return the formula).
  CellContent content(CellAddress a) const;
  /// Computed value.
  Value value(CellAddress a) const;
  /// Throws OutOfRange when `r` leaves the extents.
  std::vector<std::vector<CellContent>> getCells(const Region& r, bool bypassCache = false) const;
  std::vector<std::vector<Value>> getValues(const Region& r) const;
  /// Reads `r` as a table value: header row gives attribute names.
  TableValue readRegion(const Region& r) const;

  /// Returns the edited cell and every formula cell whose value changed.
  /// Extents grow on demand. Throws CycleError (state unchanged) or
  /// OutOfRange past the sheet limits.
  std::vector<ChangedCell> updateCell(CellAddress a, const CellContent& c);

  void insertRowAfter(Index row);
  void insertColumnAfter(Index col);
  void deleteRow(Index row);
  void deleteColumn(Index col);

  /// Re-evaluates every formula from scratch through the physical layout.
  /// Returns the number of formulas evaluated.
  std::size_t recalculate();

  /// Current layout: ROM/COM/TOM tables plus RCV regions, display coordinates.
  Decomposition decomposition() const;
  OptimizeResult optimizeLayout(const OptimizeRequest& req);

  /// Logical content in display coordinates.
  Sheet snapshot() const;
  std::vector<RowId> rowIds() const { return rowMap_->toVector(); }
  std::vector<ColId> colIds() const { return colMap_->toVector(); }
  const PositionalMap& rowMap() const { return *rowMap_; }
  const EngineCounters& counters() const { return counters_; }
  const EngineOptions& options() const { return options_; }

  // Linked tables (used through Workbook).
  std::vector<PinnedTable> linkedRegions() const;
  std::optional<Region> linkedRegion(const std::string& table) const;
  TableValue readLinked(const std::string& table) const;
  /// Pins `r` as TOM `table`; cells stay as they are.
  void link(const Region& r, const std::string& table);
  /// Replaces the linked region's content with `t`, anchored at its top-left.
  void renderLinked(const std::string& table, const TableValue& t);

  /// Physical-layout self check (recoverability against the snapshot, table
  /// bookkeeping, formula graph).
  RecoverabilityReport checkConsistency() const;

 private:
  struct Table;
  struct IdPairHash {
    std::size_t operator()(const std::pair<RowId, ColId>& p) const noexcept {
      return std::hash<std::uint64_t>()(p.first * 0x9E3779B97F4A7C15ULL ^ p.second);
    }
  };
  using IdPair = std::pair<RowId, ColId>;

  void init(Index rows, Index cols);
  void materialize(const Sheet& sheet, const Decomposition& layout);
  void loadFormulas(const Sheet& sheet);
  Table* owner(CellAddress a);
  const Table* owner(CellAddress a) const;
  CellContent readStored(CellAddress a, RowId r, ColId c) const;
  void writeStored(CellAddress a, const CellContent& content);
  void structural(bool rows, bool insert, Index at);
  std::vector<ChangedCell> recomputeFrom(const std::set<CellAddress>& changed);
  void cachePut(const IdPair& key, const CellContent& c) const;
  void relayout(const Sheet& sheet, const Decomposition& layout);

  class Reader;

  EngineOptions options_;
  Index rows_ = 0;
  Index cols_ = 0;
  std::uint64_t revision_ = 0;
  RowId nextRowId_ = 1;
  ColId nextColId_ = 1;
  std::unique_ptr<PositionalMap> rowMap_;
  std::unique_ptr<PositionalMap> colMap_;
  std::vector<std::unique_ptr<Table>> tables_;  // ROM, COM, TOM
  std::vector<Region> rcvRegions_;
  std::unordered_map<IdPair, CellContent, IdPairHash> rcv_;
  std::map<CellAddress, ExprPtr> formulas_;
  std::map<CellAddress, Value> formulaValues_;
  DependencyGraph graph_;
  mutable EngineCounters counters_;
  // Write-through LRU over (RowId, ColId).
  mutable std::list<std::pair<IdPair, CellContent>> lru_;
  mutable std::unordered_map<IdPair, std::list<std::pair<IdPair, CellContent>>::iterator, IdPairHash>
      cacheIndex_;
};

/// Sheets by name plus the catalog of named tables.
class Workbook {
 public:
  explicit Workbook(EngineOptions options = {}) : options_(options) {}

  SheetEngine& addSheet(const std::string& name, Index rows = 0, Index cols = 0);
  SheetEngine& addSheet(const std::string& name, SheetEngine engine);
  bool hasSheet(const std::string& name) const { return sheets_.count(name) != 0; }
  SheetEngine& sheet(const std::string& name);  // throws std::out_of_range
  const SheetEngine& sheet(const std::string& name) const;
  std::vector<std::string> sheetNames() const;

  /// Two-way binding of `r` on `sheet` to `table`. An existing unlinked table
  /// is rendered into the sheet at r's top-left; otherwise the table is
  /// created from the region (first row = attribute names).
  void linkTable(const std::string& sheet, const Region& r, const std::string& table);
  /// Linked tables re-render into their region; others are stored as is.
  void setTable(const std::string& name, const TableValue& t);
  TableValue table(const std::string& name) const;
  bool hasTable(const std::string& name) const;
  std::vector<std::string> tableNames() const;
  /// Linked table -> sheet name.
  std::optional<std::string> linkedSheet(const std::string& table) const;
  const std::map<std::string, TableValue>& unlinkedTables() const { return tables_; }

  const EngineOptions& options() const { return options_; }

 private:
  EngineOptions options_;
  std::map<std::string, SheetEngine> sheets_;
  std::map<std::string, TableValue> tables_;
};

}  // namespace gridstore
