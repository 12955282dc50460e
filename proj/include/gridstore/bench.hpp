#pragma once

// Synthetic sheets, update workloads, corpus import and the measurement
// protocols behind the CLI's bench-* subcommands.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridstore/core.hpp"
#include "gridstore/costmodel.hpp"
#include "gridstore/decomposer.hpp"
#include "gridstore/engine.hpp"
#include "gridstore/posmap.hpp"
#include "gridstore/reference.hpp"

namespace gridstore {

/// Tables are dense rectangles of integers placed uniformly at random,
/// separated from each other by at least one empty row or column. Formulae
/// are SUM or AVERAGE (even odds) over a uniformly random sub-rectangle of a
/// uniformly chosen table, placed in random empty cells with no filled
/// 4-neighbour.
struct SyntheticSpec {
  Index rows = 1000;
  Index cols = 200;
  int tableCount = 20;
  Index minTableRows = 20;
  Index maxTableRows = 200;
  Index minTableCols = 5;
  Index maxTableCols = 50;
  int formulaCount = 100;
  std::uint64_t seed = 1;
};

struct SyntheticSheet {
  Sheet sheet;
  std::vector<Region> tables;
  std::vector<CellAddress> formulas;
};

/// Deterministic given the spec; throws std::runtime_error when the tables
/// cannot be placed.
SyntheticSheet genSynthetic(const SyntheticSpec& spec);

enum class UpdateKind { UpdateExisting, AddCell, AddRow, AddColumn };

struct UpdateOp {
  UpdateKind kind = UpdateKind::UpdateExisting;
  CellAddress addr;        // cell operations
  double value = 0;        // cell operations
  Index after = 0;         // AddRow / AddColumn
};

struct UpdateWorkload {
  double updateExisting = 0.6;
  double addCell = 0.2;
  double addRow = 0.1999;
  double addColumn = 0.0001;
  Index opCount = 10000;
  Index batchSize = 1000;
  std::uint64_t seed = 1;
};

struct UpdateScript {
  std::vector<UpdateOp> ops;
  Index batchSize = 1000;
};

/// Simulates positions while generating, so updates target filled cells and
/// new cells land next to existing content (right of or below a random
/// filled cell). Throws std::invalid_argument unless the mix sums to 1.
UpdateScript genUpdateWorkload(const UpdateWorkload& w, const Sheet& sheet);
void applyOp(SheetEngine& e, const UpdateOp& op);
void applyOp(ReferenceEngine& e, const UpdateOp& op);

/// RFC 4180 CSV (quotes, doubled quotes, embedded separators and newlines).
/// Fields parse as number, TRUE/FALSE, formula (leading '=') or text; with
/// `headers` the first row is kept as text.
Sheet importCsv(std::istream& in, bool headers = false);
Sheet importCsvFile(const std::string& path, bool headers = false);
/// Mask text ('0'/'1'/'.') to a sheet with a number in every filled cell.
Sheet importMask(std::string_view text);

struct StorageRow {
  std::string layout;  // rom, com, rcv, dp, greedy, aggressive
  std::string params;  // pg, ideal
  std::optional<double> cost;  // empty when the DP budget is exceeded
  std::optional<double> normalized;
};
/// Whole-bounding-box ROM/COM, all-RCV and the optimizers under pgParams
/// and idealParams; per parameter set the worst layout is 100 and the others
/// 100 * cost / worst.
std::vector<StorageRow> benchStorage(const Sheet& sheet, const DecomposeOptions& o = {});

struct PosmapTiming {
  std::string impl;
  Index n = 0;
  int ops = 0;
  double fetchUs = 0;
  double insertUs = 0;
  double deleteUs = 0;
};
/// Mean latency of `ops` random fetches, inserts and deletes (inserts and
/// deletes alternate so N stays fixed) on a map built with N ids.
PosmapTiming benchPosmap(PosMapKind kind, Index n, int ops, std::uint64_t seed = 1);

struct FormulaRow {
  std::string layout;  // rom, rcv, aggressive
  double modeled = 0;
  double wallMs = 0;   // best of `repeats` full recalculations
  std::size_t formulas = 0;
};
/// Whole-bounding-box ROM, all-RCV and the aggressive layout under `p`.
std::vector<FormulaRow> benchFormula(const Sheet& sheet, int repeats = 5, const CostParams& p = idealParams());

struct IncrementalRow {
  double eta = 0;
  Index batch = 0;
  double costBefore = 0;  // storage of the live layout after the batch
  double costAfter = 0;   // after re-optimization
  Index migrated = 0;
};
/// Aggressive layout first, then per batch: apply the ops, record storage,
/// re-optimize incrementally with `eta`.
std::vector<IncrementalRow> benchIncremental(const Sheet& sheet, const UpdateWorkload& w,
                                             const std::vector<double>& etas,
                                             const CostParams& p = pgParams());

/// hybridCost of the engine's current layout over its current content.
double liveStorageCost(const SheetEngine& e, const CostParams& p);

}  // namespace gridstore
