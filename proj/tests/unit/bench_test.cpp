#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridstore/analyzer.hpp"
#include "gridstore/bench.hpp"
#include "gridstore/formula.hpp"

using namespace gridstore;

namespace {

SyntheticSpec small() {
  SyntheticSpec s;
  s.rows = 120;
  s.cols = 40;
  s.tableCount = 4;
  s.minTableRows = 5;
  s.maxTableRows = 20;
  s.minTableCols = 2;
  s.maxTableCols = 6;
  s.formulaCount = 10;
  s.seed = 7;
  return s;
}

}  // namespace

TEST(Bench, SyntheticEmptySpec) {
  SyntheticSpec s;
  s.tableCount = 0;
  s.formulaCount = 0;
  const auto g = genSynthetic(s);
  EXPECT_TRUE(g.sheet.empty());
  EXPECT_EQ(g.sheet.rows(), s.rows);
  EXPECT_EQ(g.sheet.cols(), s.cols);
}

TEST(Bench, SyntheticDefaultHasTwentyComponents) {
  const auto g = genSynthetic(SyntheticSpec{});
  EXPECT_EQ(connectedComponents(g.sheet).size(), 20U);
  EXPECT_EQ(tabularRegions(g.sheet).size(), 20U);
  EXPECT_EQ(g.tables.size(), 20U);
  EXPECT_EQ(g.formulas.size(), 100U);
}

TEST(Bench, SyntheticDeterministic) {
  const auto a = genSynthetic(SyntheticSpec{});
  const auto b = genSynthetic(SyntheticSpec{});
  EXPECT_EQ(a.sheet.cells(), b.sheet.cells());
  SyntheticSpec other;
  other.seed = 2;
  EXPECT_NE(genSynthetic(other).sheet.cells(), a.sheet.cells());
}

TEST(Bench, SyntheticShape) {
  const SyntheticSpec spec;
  const auto g = genSynthetic(spec);
  for (const auto& t : g.tables) {
    EXPECT_GE(t.rowCount(), spec.minTableRows);
    EXPECT_LE(t.rowCount(), spec.maxTableRows);
    EXPECT_GE(t.colCount(), spec.minTableCols);
    EXPECT_LE(t.colCount(), spec.maxTableCols);
    EXPECT_EQ(g.sheet.countIn(t), static_cast<std::size_t>(t.area()));
  }
  for (const auto& f : g.formulas) {
    const auto& c = g.sheet.get(f);
    ASSERT_TRUE(isFormula(c));
    const auto& src = std::get<Formula>(c).source;
    EXPECT_TRUE(src.rfind("=SUM(", 0) == 0 || src.rfind("=AVERAGE(", 0) == 0) << src;
    const auto refs = references(*std::get<Formula>(c).expr);
    ASSERT_EQ(refs.size(), 1U);
    EXPECT_TRUE(std::any_of(g.tables.begin(), g.tables.end(),
                            [&](const Region& t) { return t.contains(refs[0]); }))
        << src;
  }
}

TEST(Bench, SyntheticImpossiblePlacementThrows) {
  SyntheticSpec s;
  s.rows = 30;
  s.cols = 30;
  EXPECT_THROW(genSynthetic(s), std::runtime_error);
}

TEST(Bench, WorkloadMix) {
  const auto g = genSynthetic(SyntheticSpec{});
  UpdateWorkload w;
  w.opCount = 10000;
  const auto script = genUpdateWorkload(w, g.sheet);
  ASSERT_EQ(script.ops.size(), 10000U);
  EXPECT_EQ(script.batchSize, 1000);
  std::array<double, 4> counts{};
  for (const auto& op : script.ops) counts[static_cast<int>(op.kind)] += 1;
  const std::array<double, 4> expected{w.updateExisting, w.addCell, w.addRow, w.addColumn};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(counts[k] / 10000.0, expected[k], 0.02) << k;
  EXPECT_EQ(genUpdateWorkload(w, g.sheet).ops.size(), script.ops.size());
}

TEST(Bench, WorkloadEmptyAndInvalid) {
  const auto g = genSynthetic(small());
  UpdateWorkload w;
  w.opCount = 0;
  EXPECT_TRUE(genUpdateWorkload(w, g.sheet).ops.empty());
  w.opCount = 10;
  w.addCell = 0.5;
  EXPECT_THROW(genUpdateWorkload(w, g.sheet), std::invalid_argument);
}

TEST(Bench, WorkloadUpdatesTargetFilledCells) {
  const auto g = genSynthetic(small());
  UpdateWorkload w;
  w.opCount = 2000;
  w.seed = 3;
  const auto script = genUpdateWorkload(w, g.sheet);
  ReferenceEngine ref(g.sheet);
  for (const auto& op : script.ops) {
    if (op.kind == UpdateKind::UpdateExisting) EXPECT_TRUE(ref.sheet().filled(op.addr));
    applyOp(ref, op);
  }
}

TEST(Bench, WorkloadReplayMatchesReference) {
  const auto g = genSynthetic(small());
  UpdateWorkload w;
  w.opCount = 3000;
  w.addRow = 0.1;
  w.addColumn = 0.1;
  w.seed = 11;
  const auto script = genUpdateWorkload(w, g.sheet);
  SheetEngine engine(g.sheet);
  engine.optimizeLayout({});
  ReferenceEngine ref(g.sheet);
  for (const auto& op : script.ops) {
    applyOp(engine, op);
    applyOp(ref, op);
  }
  EXPECT_EQ(engine.snapshot().cells(), ref.sheet().cells());
  EXPECT_EQ(engine.rows(), ref.rows());
  EXPECT_EQ(engine.cols(), ref.cols());
  for (const auto& [a, c] : ref.sheet().cells()) {
    if (isFormula(c)) EXPECT_TRUE(sameValue(engine.value(a), ref.value(a))) << formatA1(a);
  }
  EXPECT_TRUE(engine.checkConsistency().ok);
}

TEST(Bench, CsvImport) {
  std::istringstream in("name,qty,ok,calc\n\"bolt, m4\",3,TRUE,=B2*2\n\"say \"\"hi\"\"\",-1.5,false,\n\"two\nlines\",,x,\r\n");
  const Sheet s = importCsv(in);
  EXPECT_EQ(s.get({1, 1}), text("name"));
  EXPECT_EQ(s.get({2, 1}), text("bolt, m4"));
  EXPECT_EQ(s.get({2, 2}), number(3));
  EXPECT_EQ(s.get({2, 3}), boolean(true));
  EXPECT_EQ(s.get({2, 4}), formula("=B2*2"));
  EXPECT_EQ(s.get({3, 1}), text("say \"hi\""));
  EXPECT_EQ(s.get({3, 2}), number(-1.5));
  EXPECT_EQ(s.get({3, 3}), boolean(false));
  EXPECT_FALSE(s.filled({3, 4}));
  EXPECT_EQ(s.get({4, 1}), text("two\nlines"));
  EXPECT_FALSE(s.filled({4, 2}));
  EXPECT_EQ(s.get({4, 3}), text("x"));
  EXPECT_EQ(s.rows(), 4);
  EXPECT_EQ(s.cols(), 4);
}

TEST(Bench, CsvHeadersStayText) {
  std::istringstream a("1,TRUE\n2,3\n");
  const Sheet plain = importCsv(a);
  EXPECT_EQ(plain.get({1, 1}), number(1));
  std::istringstream b("1,TRUE\n2,3\n");
  const Sheet headed = importCsv(b, true);
  EXPECT_EQ(headed.get({1, 1}), text("1"));
  EXPECT_EQ(headed.get({1, 2}), text("TRUE"));
  EXPECT_EQ(headed.get({2, 1}), number(2));
}

TEST(Bench, CsvUnterminatedQuoteThrows) {
  std::istringstream in("a,\"open\n");
  EXPECT_THROW(importCsv(in), std::runtime_error);
}

TEST(Bench, MaskImport) {
  const Sheet s = importMask("10.\n011\n");
  EXPECT_EQ(s.size(), 3U);
  EXPECT_TRUE(s.filled({1, 1}));
  EXPECT_TRUE(s.filled({2, 3}));
  EXPECT_FALSE(s.filled({1, 3}));
}

TEST(Bench, StorageNormalization) {
  const auto g = genSynthetic(small());
  const auto rows = benchStorage(g.sheet);
  for (const std::string params : {"pg", "ideal"}) {
    double worst = 0;
    int hundreds = 0;
    int count = 0;
    for (const auto& r : rows) {
      if (r.params != params || !r.cost) continue;
      ++count;
      worst = std::max(worst, *r.cost);
      ASSERT_TRUE(r.normalized);
      if (*r.normalized == 100.0) ++hundreds;
      EXPECT_LE(*r.normalized, 100.0);
    }
    EXPECT_EQ(count, 6) << params;
    EXPECT_GE(hundreds, 1);
    for (const auto& r : rows) {
      if (r.params == params && r.cost) EXPECT_DOUBLE_EQ(*r.normalized, 100.0 * *r.cost / worst);
    }
  }
}

TEST(Bench, StorageBudgetExceededLeavesDpEmpty) {
  const auto g = genSynthetic(small());
  DecomposeOptions o;
  o.dpStateBudget = 10;
  const auto rows = benchStorage(g.sheet, o);
  for (const auto& r : rows) {
    if (r.layout == "dp") {
      EXPECT_FALSE(r.cost);
      EXPECT_FALSE(r.normalized);
    }
  }
}

TEST(Bench, PosmapTimingSmoke) {
  for (auto k : {PosMapKind::Hierarchical, PosMapKind::Monotonic, PosMapKind::Direct}) {
    const auto t = benchPosmap(k, 1000, 200);
    EXPECT_EQ(t.n, 1000);
    EXPECT_EQ(t.ops, 200);
    EXPECT_GT(t.fetchUs, 0);
    EXPECT_GT(t.insertUs, 0);
    EXPECT_GT(t.deleteUs, 0);
  }
}

TEST(Bench, FormulaRowsPerLayout) {
  const auto g = genSynthetic(small());
  const auto rows = benchFormula(g.sheet, 1);
  ASSERT_EQ(rows.size(), 3U);
  EXPECT_EQ(rows[0].layout, "rom");
  EXPECT_EQ(rows[1].layout, "rcv");
  EXPECT_EQ(rows[2].layout, "aggressive");
  for (const auto& r : rows) {
    EXPECT_EQ(r.formulas, 10U);
    EXPECT_GT(r.modeled, 0);
  }
}

TEST(Bench, IncrementalSawtooth) {
  const auto g = genSynthetic(small());
  UpdateWorkload w;
  w.opCount = 3000;
  const auto rows = benchIncremental(g.sheet, w, {0.5, kInfiniteCost});
  ASSERT_EQ(rows.size(), 6U);
  for (const auto& r : rows) {
    if (r.migrated > 0) EXPECT_LE(r.costAfter, r.costBefore + 1e-9);
    if (std::isinf(r.eta)) EXPECT_EQ(r.migrated, 0);
  }
}

TEST(Bench, LiveStorageCostMatchesHybrid) {
  const auto g = genSynthetic(small());
  SheetEngine e(g.sheet);
  const auto res = e.optimizeLayout({});
  EXPECT_DOUBLE_EQ(liveStorageCost(e, pgParams()), res.cost);
  EXPECT_DOUBLE_EQ(liveStorageCost(e, pgParams()),
                   hybridCost(e.decomposition(), e.snapshot(), pgParams()));
}
