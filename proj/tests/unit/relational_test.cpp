#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "gridstore/relational.hpp"

using namespace gridstore;

namespace {

TableValue single(std::initializer_list<double> xs, const std::string& attr = "x") {
  TableValue t{{attr}, {}};
  for (const double x : xs) t.rows.push_back({number(x)});
  return t;
}

std::string key(const std::vector<CellContent>& row) {
  std::string k;
  for (const auto& c : row) k += describe(c) + "\x1f";
  return k;
}

std::map<std::string, int> bag(const TableValue& t) {
  std::map<std::string, int> b;
  for (const auto& r : t.rows) ++b[key(r)];
  return b;
}

TableValue randomTable(std::mt19937_64& rng, const std::vector<std::string>& attrs, int maxRows) {
  TableValue t{attrs, {}};
  const int n = static_cast<int>(rng() % static_cast<unsigned>(maxRows + 1));
  for (int i = 0; i < n; ++i) {
    std::vector<CellContent> row;
    for (std::size_t j = 0; j < attrs.size(); ++j) {
      switch (rng() % 4) {
        case 0:
          row.push_back(text(std::string(1, static_cast<char>('a' + rng() % 3))));
          break;
        case 1:
          row.push_back(Empty{});
          break;
        default:
          row.push_back(number(static_cast<double>(rng() % 4)));
      }
    }
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace

TEST(Relational, UnionIsSet) {
  const auto u = unionOf(single({1, 2}), single({2, 3}));
  EXPECT_EQ(u, single({1, 2, 3}));
  EXPECT_EQ(unionOf(single({1, 1}), single({})), single({1}));
}

TEST(Relational, DifferenceAndIntersection) {
  EXPECT_EQ(difference(single({1, 2, 2, 3}), single({2})), single({1, 3}));
  EXPECT_EQ(intersection(single({3, 1, 2}), single({2, 3})), single({3, 2}));
}

TEST(Relational, SchemaMismatch) {
  EXPECT_THROW(unionOf(single({1}), single({1}, "y")), RelationalError);
  EXPECT_THROW(crossProduct(single({1}), single({1})), RelationalError);
  EXPECT_THROW(project(single({1}), {"nope"}), RelationalError);
  EXPECT_THROW(rename(single({1}), "nope", "z"), RelationalError);
  TableValue bad{{"a", "a"}, {}};
  EXPECT_THROW(bad.validate(), RelationalError);
}

TEST(Relational, JoinTwoMatches) {
  TableValue left{{"id", "name"}, {{number(1), text("ann")}, {number(2), text("bo")}}};
  TableValue right{{"id", "qty"}, {{number(2), number(5)}, {number(3), number(6)}, {number(1), number(7)}}};
  const auto j = join(left, right);
  EXPECT_EQ(j.attributes, (std::vector<std::string>{"id", "name", "qty"}));
  ASSERT_EQ(j.rowCount(), 2);
  EXPECT_EQ(j.rows[0], (std::vector<CellContent>{number(1), text("ann"), number(7)}));
  EXPECT_EQ(j.rows[1], (std::vector<CellContent>{number(2), text("bo"), number(5)}));
}

TEST(Relational, PredicateJoinAndFilter) {
  TableValue a{{"p"}, {{number(1)}, {number(5)}}};
  TableValue b{{"q"}, {{number(3)}, {number(4)}}};
  const auto j = join(a, b, "=p>q");
  ASSERT_EQ(j.rowCount(), 2);
  EXPECT_EQ(j.rows[0], (std::vector<CellContent>{number(5), number(3)}));
  EXPECT_EQ(filter(single({1, 5, 7}), "x>=5"), single({5, 7}));
  EXPECT_THROW(filter(single({1}), "=nope>1"), RelationalError);
}

TEST(Relational, ProjectRenameIndex) {
  TableValue t{{"a", "b"}, {{number(1), text("x")}, {number(2), text("y")}}};
  EXPECT_EQ(project(t, {"b"}).rows[1], (std::vector<CellContent>{text("y")}));
  EXPECT_EQ(rename(t, "a", "z").attributes, (std::vector<std::string>{"z", "b"}));
  EXPECT_EQ(indexInto(t, 1, 1), number(1));
  EXPECT_EQ(indexInto(t, 2, 2), text("y"));
  EXPECT_THROW(indexInto(t, 3, 1), RelationalError);
  EXPECT_THROW(indexInto(t, 1, 0), RelationalError);
}

TEST(Relational, CrossProductOrder) {
  const auto c = crossProduct(single({1, 2}, "a"), single({3, 4}, "b"));
  ASSERT_EQ(c.rowCount(), 4);
  EXPECT_EQ(c.rows[1], (std::vector<CellContent>{number(1), number(4)}));
  EXPECT_EQ(c.rows[2], (std::vector<CellContent>{number(2), number(3)}));
}

TEST(Relational, RandomAgainstBagOracle) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto a = randomTable(rng, {"k", "v"}, 6);
    const auto b = randomTable(rng, {"k", "v"}, 6);
    auto ba = bag(a), bb = bag(b);
    std::map<std::string, int> u, d, in;
    for (const auto& [k, n] : ba) {
      u[k] = 1;
      if (!bb.count(k)) d[k] = 1;
      if (bb.count(k)) in[k] = 1;
    }
    for (const auto& [k, n] : bb) u[k] = 1;
    ASSERT_EQ(bag(unionOf(a, b)), u);
    ASSERT_EQ(bag(difference(a, b)), d);
    ASSERT_EQ(bag(intersection(a, b)), in);

    const auto c = randomTable(rng, {"k", "w"}, 6);
    // Natural join oracle: group the right side by key, multiply counts.
    std::multimap<std::string, const std::vector<CellContent>*> byKey;
    for (const auto& r : c.rows) byKey.emplace(describe(r[0]), &r);
    std::map<std::string, int> expectJoin;
    for (const auto& r : a.rows) {
      auto [lo, hi] = byKey.equal_range(describe(r[0]));
      for (auto it = lo; it != hi; ++it) ++expectJoin[key({r[0], r[1], (*it->second)[1]})];
    }
    ASSERT_EQ(bag(join(a, c)), expectJoin) << i;

    const auto x = crossProduct(a, rename(rename(c, "k", "k2"), "w", "w2"));
    ASSERT_EQ(x.rowCount(), a.rowCount() * c.rowCount());
    std::map<std::string, int> expectCross;
    for (const auto& [ka, na] : ba) {
      for (const auto& [kc, nc] : bag(c)) expectCross[ka + kc] += na * nc;
    }
    ASSERT_EQ(bag(x), expectCross);
  }
}
