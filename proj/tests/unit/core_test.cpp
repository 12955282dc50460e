#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "gridstore/core.hpp"
#include "gridstore/formula.hpp"

using namespace gridstore;

TEST(ParseA1, FirstCell) {
  EXPECT_EQ(parseA1("A1"), (CellAddress{1, 1}));
}

TEST(ParseA1, ColumnBRow2) {
  EXPECT_EQ(parseA1("B2"), (CellAddress{2, 2}));
}

TEST(ParseA1, TwoLetterColumn) {
  EXPECT_EQ(parseA1("AA1"), (CellAddress{1, 27}));
  EXPECT_EQ(parseA1("AZ1").col, 52);
  EXPECT_EQ(parseA1("ZZZ9").col, 18278);
}

TEST(ParseA1, Malformed) {
  EXPECT_THROW(parseA1("1A"), ParseError);
  EXPECT_THROW(parseA1("A"), ParseError);
  EXPECT_THROW(parseA1("A0"), ParseError);
  EXPECT_THROW(parseA1(""), ParseError);
  try {
    parseA1("A1B");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("A1B"), std::string::npos);
  }
}

TEST(ParseA1, RoundTripThreeLetters) {
  for (Index col = 1; col <= 18278; ++col) {
    const CellAddress a{col % 97 + 1, col};
    ASSERT_EQ(parseA1(formatA1(a)), a) << col;
  }
}

TEST(BoundingBox, Corners) {
  Sheet s;
  s.set({1, 1}, number(1));
  s.set({3, 3}, number(1));
  EXPECT_EQ(boundingBox(s), (Region{1, 1, 3, 3}));
}

TEST(BoundingBox, SingleCell) {
  Sheet s;
  s.set({5, 7}, text("x"));
  EXPECT_EQ(boundingBox(s), (Region{5, 7, 5, 7}));
}

TEST(BoundingBox, EmptySheet) {
  EXPECT_FALSE(boundingBox(Sheet{}).has_value());
}

TEST(Sheet, WriteRead) {
  Sheet s;
  s.set({1, 1}, number(10));
  EXPECT_EQ(s.get({1, 1}), CellContent{10.0});
}

TEST(Sheet, EmptyDeletes) {
  Sheet s;
  s.set({1, 1}, number(10));
  s.set({1, 1}, Empty{});
  EXPECT_FALSE(s.filled({1, 1}));
  EXPECT_EQ(s.size(), 0U);
}

TEST(Sheet, FormulaStoredWithParse) {
  Sheet s;
  s.set({2, 2}, formula("=A1+5"));
  const auto& f = std::get<Formula>(s.get({2, 2}));
  ASSERT_TRUE(f.expr);
  EXPECT_EQ(formatFormula(*f.expr), "=A1+5");
}

TEST(Sheet, BeyondLimits) {
  Sheet s(0, 0, SheetLimits{10, 10});
  EXPECT_THROW(s.set({11, 1}, number(1)), OutOfRange);
  EXPECT_THROW(s.set({1, 11}, number(1)), OutOfRange);
  s.set({10, 10}, number(1));
  EXPECT_EQ(s.rows(), 10);
}

TEST(Sheet, MatchesDenseReference) {
  std::mt19937_64 rng(7);
  Sheet s(100, 100);
  std::vector<std::vector<bool>> dense(101, std::vector<bool>(101, false));
  std::uniform_int_distribution<int> pos(1, 100);
  for (int i = 0; i < 20000; ++i) {
    const int r = pos(rng);
    const int c = pos(rng);
    if (rng() % 3 == 0) {
      s.set({r, c}, Empty{});
      dense[r][c] = false;
    } else {
      s.set({r, c}, number(i));
      dense[r][c] = true;
    }
    if (i % 1000 == 0) {
      std::size_t n = 0;
      for (auto& row : dense) n += std::count(row.begin(), row.end(), true);
      ASSERT_EQ(s.size(), n);
    }
  }
  for (int k = 0; k < 200; ++k) {
    Region reg{pos(rng), pos(rng), 0, 0};
    reg.bottom = std::uniform_int_distribution<Index>(reg.top, 100)(rng);
    reg.right = std::uniform_int_distribution<Index>(reg.left, 100)(rng);
    std::size_t n = 0;
    for (Index r = reg.top; r <= reg.bottom; ++r) {
      for (Index c = reg.left; c <= reg.right; ++c) n += dense[r][c];
    }
    ASSERT_EQ(s.countIn(reg), n);
  }
}

TEST(OccupancyMask, ParseAndBits) {
  const auto m = OccupancyMask::parse("10\n01\n");
  EXPECT_EQ(m.rows, 2);
  EXPECT_EQ(m.cols, 2);
  EXPECT_EQ(m.filled, (std::vector<CellAddress>{{1, 1}, {2, 2}}));
  const auto b = OccupancyMask::fromBits(2, 2, 0b1001);
  EXPECT_EQ(b.filled, m.filled);
  EXPECT_THROW(OccupancyMask::parse("1x"), ParseError);
}

TEST(CellInput, TypedParsing) {
  EXPECT_TRUE(isEmpty(parseCellInput("")));
  EXPECT_EQ(parseCellInput("42"), number(42));
  EXPECT_EQ(parseCellInput("-1e3"), number(-1000));
  EXPECT_EQ(parseCellInput("true"), boolean(true));
  EXPECT_EQ(parseCellInput("FALSE"), boolean(false));
  EXPECT_EQ(parseCellInput("=A1+1"), formula("=A1+1"));
  EXPECT_EQ(parseCellInput("12abc"), text("12abc"));
  EXPECT_EQ(parseCellInput("inf"), text("inf"));
  EXPECT_EQ(parseCellInput(" 4"), text(" 4"));
  EXPECT_THROW(parseCellInput("=SUM("), ParseError);
}
