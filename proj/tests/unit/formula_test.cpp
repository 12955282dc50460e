#include <gtest/gtest.h>

#include <random>

#include "gridstore/formula.hpp"

using namespace gridstore;

namespace {

Value evalIn(const Sheet& s, const std::string& src) {
  const auto e = parseFormula(src);
  return evaluate(*e, SheetReader(s));
}

double num(const Value& v) {
  EXPECT_TRUE(std::holds_alternative<double>(v)) << displayString(v);
  return std::holds_alternative<double>(v) ? std::get<double>(v) : 0;
}

}  // namespace

TEST(ParseFormula, Minimal) {
  const auto e = parseFormula("=A1+5");
  const auto& b = std::get<Binary>(e->node);
  EXPECT_EQ(b.op, BinaryOp::Add);
  EXPECT_EQ(std::get<CellRef>(b.lhs->node).addr, (CellAddress{1, 1}));
  EXPECT_EQ(std::get<NumberLit>(b.rhs->node).value, 5);
}

TEST(ParseFormula, AverageShape) {
  const auto e = parseFormula("=AVERAGE(B2:C2)+D2+E2");
  const auto& outer = std::get<Binary>(e->node);
  EXPECT_EQ(std::get<CellRef>(outer.rhs->node).addr, (CellAddress{2, 5}));
  const auto& inner = std::get<Binary>(outer.lhs->node);
  const auto& call = std::get<Call>(inner.lhs->node);
  EXPECT_EQ(call.fn, Function::Average);
  EXPECT_EQ(std::get<RangeRef>(call.args.at(0)->node).region, (Region{2, 2, 2, 3}));
  EXPECT_EQ(formatFormula(*e), "=AVERAGE(B2:C2)+D2+E2");
}

TEST(ParseFormula, UnbalancedParenOffset) {
  try {
    parseFormula("=SUM(A1:A3");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 11U);
  }
}

TEST(ParseFormula, UnknownFunction) {
  EXPECT_THROW(parseFormula("=VLOOKUP(A1)"), ParseError);
  EXPECT_THROW(parseFormula("A1+1"), ParseError);
}

TEST(ParseFormula, PrecedenceAndAssociativity) {
  Sheet s;
  EXPECT_EQ(num(evalIn(s, "=1+2*3")), 7);
  EXPECT_EQ(num(evalIn(s, "=(1+2)*3")), 9);
  EXPECT_EQ(num(evalIn(s, "=10-4-3")), 3);
  EXPECT_EQ(num(evalIn(s, "=16/4/2")), 2);
  EXPECT_EQ(num(evalIn(s, "=-2*3")), -6);
}

TEST(ParseFormula, RangeNormalizedAndAnchorsIgnored) {
  const auto e = parseFormula("=SUM($C$3:A1)");
  const auto& call = std::get<Call>(e->node);
  EXPECT_EQ(std::get<RangeRef>(call.args[0]->node).region, (Region{1, 1, 3, 3}));
}

TEST(ParseFormula, FormatRoundTrip) {
  const char* sources[] = {"=A1+5", "=SUM(A1:B5)", "=(A1+B1)*C1", "=A1-(B1-C1)", "=A1/(B1*C1)",
                           "=MIN(A1,2,B3:C4)", "=-A1", "=\"a\"\"b\"", "=TRUE", "=A1>=2"};
  for (const char* src : sources) {
    const auto e = parseFormula(src);
    EXPECT_EQ(formatFormula(*e), src);
    EXPECT_TRUE(structurallyEqual(*parseFormula(formatFormula(*e)), *e)) << src;
  }
}

TEST(Evaluate, SumOfRange) {
  Sheet s;
  s.set(parseA1("A1"), number(1));
  s.set(parseA1("A2"), number(2));
  s.set(parseA1("A3"), number(3));
  EXPECT_EQ(num(evalIn(s, "=SUM(A1:A3)")), 6);
}

TEST(Evaluate, AveragePlusCells) {
  Sheet s;
  s.set(parseA1("B2"), number(10));
  s.set(parseA1("C2"), number(20));
  s.set(parseA1("D2"), number(30));
  s.set(parseA1("E2"), number(40));
  EXPECT_EQ(num(evalIn(s, "=AVERAGE(B2:C2)+D2+E2")), 85);
}

TEST(Evaluate, AggregatesSkipEmptyAndText) {
  Sheet s(10, 10);
  s.set({1, 1}, number(4));
  s.set({2, 1}, text("x"));
  s.set({4, 1}, number(8));
  EXPECT_EQ(num(evalIn(s, "=SUM(A1:A5)")), 12);
  EXPECT_EQ(num(evalIn(s, "=AVERAGE(A1:A5)")), 6);
  EXPECT_EQ(num(evalIn(s, "=COUNT(A1:A5)")), 2);
  EXPECT_EQ(num(evalIn(s, "=MIN(A1:A5)")), 4);
  EXPECT_EQ(num(evalIn(s, "=MAX(A1:A5)")), 8);
}

TEST(Evaluate, Errors) {
  Sheet s(10, 10);
  s.set({1, 1}, number(1));
  EXPECT_EQ(std::get<FormulaError>(evalIn(s, "=A1/0")).code, ErrorCode::DivZero);
  EXPECT_EQ(std::get<FormulaError>(evalIn(s, "=AVERAGE(B1:B5)")).code, ErrorCode::DivZero);
  EXPECT_EQ(std::get<FormulaError>(evalIn(s, "=A20+1")).code, ErrorCode::Ref);
  EXPECT_EQ(std::get<FormulaError>(evalIn(s, "=SUM(A1:K1)")).code, ErrorCode::Ref);
}

TEST(Footprint, Examples) {
  auto f = accessFootprint(*parseFormula("=A1+5"));
  EXPECT_EQ(f.regions, (std::vector<Region>{{1, 1, 1, 1}}));
  EXPECT_EQ(f.cellCount, 1);
  f = accessFootprint(*parseFormula("=SUM(A1:B5)"));
  EXPECT_EQ(f.regions, (std::vector<Region>{{1, 1, 5, 2}}));
  EXPECT_EQ(f.cellCount, 10);
  f = accessFootprint(*parseFormula("=SUM(A1:A3)+SUM(C1:C3)"));
  EXPECT_EQ(f.regions.size(), 2U);
  EXPECT_EQ(f.cellCount, 6);
}

TEST(Footprint, MatchesEnumeration) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(1, 30);
  for (int i = 0; i < 1000; ++i) {
    std::string src = "=";
    std::vector<std::vector<CellAddress>> expected;
    const int terms = 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < terms; ++t) {
      if (t) src += "+";
      const CellAddress a{coord(rng), coord(rng)};
      if (rng() % 2) {
        src += formatA1(a);
        expected.push_back({a});
      } else {
        const CellAddress b{coord(rng), coord(rng)};
        src += "SUM(" + formatA1(a) + ":" + formatA1(b) + ")";
        std::vector<CellAddress> cells;
        for (Index r = std::min(a.row, b.row); r <= std::max(a.row, b.row); ++r) {
          for (Index c = std::min(a.col, b.col); c <= std::max(a.col, b.col); ++c) {
            cells.push_back({r, c});
          }
        }
        expected.push_back(cells);
      }
    }
    Index count = 0;
    for (const auto& cells : expected) count += static_cast<Index>(cells.size());
    const auto f = accessFootprint(*parseFormula(src));
    ASSERT_EQ(f.cellCount, count) << src;
    ASSERT_EQ(f.regions.size(), expected.size()) << src;
  }
}

TEST(Graph, CycleRejected) {
  DependencyGraph g;
  g.setFormula(parseA1("A1"), *parseFormula("=B1"));
  EXPECT_THROW(g.setFormula(parseA1("B1"), *parseFormula("=A1")), CycleError);
  EXPECT_FALSE(g.hasFormula(parseA1("B1")));
  EXPECT_TRUE(g.consistent());
  EXPECT_THROW(g.setFormula(parseA1("C1"), *parseFormula("=SUM(A1:D1)")), CycleError);
  EXPECT_THROW(g.setFormula(parseA1("D4"), *parseFormula("=D4")), CycleError);
}

TEST(Recompute, ChainLengthOne) {
  Sheet s;
  DependencyGraph g;
  std::map<CellAddress, Value> values;
  s.set(parseA1("A1"), number(1));
  s.set(parseA1("B1"), formula("=A1+1"));
  g.setFormula(parseA1("B1"), *std::get<Formula>(s.get(parseA1("B1"))).expr);
  recompute(g, s, {parseA1("B1")}, values);
  EXPECT_EQ(std::get<double>(values.at(parseA1("B1"))), 2);
  s.set(parseA1("A1"), number(2));
  const auto updates = recompute(g, s, {parseA1("A1")}, values);
  ASSERT_EQ(updates.size(), 1U);
  EXPECT_EQ(updates[0].first, parseA1("B1"));
  EXPECT_EQ(std::get<double>(updates[0].second), 3);
}

TEST(Recompute, ChainOrder) {
  Sheet s;
  DependencyGraph g;
  std::map<CellAddress, Value> values;
  s.set(parseA1("A1"), number(1));
  for (const auto& [cell, src] : {std::pair{"C1", "=B1*2"}, std::pair{"B1", "=A1+1"}}) {
    s.set(parseA1(cell), formula(src));
    g.setFormula(parseA1(cell), *parseFormula(src));
  }
  recompute(g, s, {parseA1("B1"), parseA1("C1")}, values);
  EXPECT_EQ(std::get<double>(values.at(parseA1("C1"))), 4);
  s.set(parseA1("A1"), number(5));
  const auto updates = recompute(g, s, {parseA1("A1")}, values);
  ASSERT_EQ(updates.size(), 2U);
  EXPECT_EQ(updates[0].first, parseA1("B1"));
  EXPECT_EQ(updates[1].first, parseA1("C1"));
  EXPECT_EQ(std::get<double>(updates[1].second), 12);
}

TEST(Recompute, UnreadCellNoUpdates) {
  Sheet s;
  DependencyGraph g;
  std::map<CellAddress, Value> values;
  s.set(parseA1("B1"), formula("=A1+1"));
  g.setFormula(parseA1("B1"), *parseFormula("=A1+1"));
  recompute(g, s, {parseA1("B1")}, values);
  s.set(parseA1("Z9"), number(3));
  EXPECT_TRUE(recompute(g, s, {parseA1("Z9")}, values).empty());
}

TEST(Recompute, RandomDagMatchesFullEvaluation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Sheet s(40, 12);
    DependencyGraph g;
    std::map<CellAddress, Value> values;
    // Column 1..2 hold inputs; formulas in later columns read only earlier
    // columns, so the graph is acyclic.
    for (Index r = 1; r <= 40; ++r) {
      s.set({r, 1}, number(static_cast<double>(rng() % 100)));
      s.set({r, 2}, number(static_cast<double>(rng() % 100)));
    }
    std::vector<CellAddress> cells;
    for (int i = 0; i < 200; ++i) {
      const CellAddress at{static_cast<Index>(1 + rng() % 40), static_cast<Index>(3 + rng() % 10)};
      if (s.filled(at)) continue;
      const Index maxCol = at.col - 1;
      auto pick = [&] {
        return CellAddress{static_cast<Index>(1 + rng() % 40), static_cast<Index>(1 + rng() % maxCol)};
      };
      std::string src;
      if (rng() % 2) {
        src = "=" + formatA1(pick()) + "+" + formatA1(pick()) + "*2";
      } else {
        const CellAddress a = pick();
        const CellAddress b = pick();
        src = "=SUM(" + formatA1(a) + ":" + formatA1(b) + ")-AVERAGE(" + formatA1(pick()) + ":" +
              formatA1(pick()) + ")";
      }
      s.set(at, formula(src));
      g.setFormula(at, *parseFormula(src));
      cells.push_back(at);
    }
    std::set<CellAddress> all(cells.begin(), cells.end());
    recompute(g, s, all, values);
    ASSERT_TRUE(g.consistent());
    for (int edit = 0; edit < 30; ++edit) {
      const CellAddress in{static_cast<Index>(1 + rng() % 40), static_cast<Index>(1 + rng() % 2)};
      s.set(in, number(static_cast<double>(rng() % 1000)));
      recompute(g, s, {in}, values);
      const SheetReader fresh(s);
      for (const auto& c : cells) {
        ASSERT_TRUE(sameValue(values.at(c), fresh.value(c))) << formatA1(c);
      }
    }
  }
}

TEST(Shift, InsertAndDeleteRows) {
  auto e = parseFormula("=SUM(A2:A4)+B1");
  EXPECT_EQ(formatFormula(*shiftForInsert(e, true, 2)), "=SUM(A2:A5)+B1");
  EXPECT_EQ(formatFormula(*shiftForInsert(e, true, 0)), "=SUM(A3:A5)+B2");
  EXPECT_EQ(formatFormula(*shiftForDelete(e, true, 3)), "=SUM(A2:A3)+B1");
  EXPECT_EQ(formatFormula(*shiftForDelete(e, true, 1)), "=SUM(A1:A3)+#REF!");
  EXPECT_EQ(formatFormula(*shiftForInsert(e, false, 1)), "=SUM(A2:A4)+C1");
  const auto one = parseFormula("=SUM(A2:A2)");
  EXPECT_EQ(formatFormula(*shiftForDelete(one, true, 2)), "=SUM(#REF!)");
}
