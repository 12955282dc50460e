#include "gridstore/costmodel.hpp"

#include <charconv>
#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridstore {

CostParams pgParams() { return {8192, 0.125, 40, 50, 52}; }
CostParams idealParams() { return {0, 1, 1, 1, 3}; }
CostParams unitParams() { return {1, 1, 1, 1, 3}; }

std::string_view kindName(ModelKind k) {
  switch (k) {
    case ModelKind::ROM:
      return "ROM";
    case ModelKind::COM:
      return "COM";
    case ModelKind::RCV:
      return "RCV";
    case ModelKind::TOM:
      return "TOM";
  }
  return "?";
}

ModelKind parseKind(std::string_view s) {
  if (s == "ROM") return ModelKind::ROM;
  if (s == "COM") return ModelKind::COM;
  if (s == "RCV") return ModelKind::RCV;
  if (s == "TOM") return ModelKind::TOM;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

double romCost(Index rows, Index cols, const CostParams& p) {
  const double r = static_cast<double>(rows);
  const double c = static_cast<double>(cols);
  return p.s1 + p.s2 * r * c + p.s3 * c + p.s4 * r;
}

double comCost(Index rows, Index cols, const CostParams& p) {
  const double r = static_cast<double>(rows);
  const double c = static_cast<double>(cols);
  return p.s1 + p.s2 * r * c + p.s4 * c + p.s3 * r;
}

double rcvCost(Index filledCells, const CostParams& p) { return p.s5 * static_cast<double>(filledCells); }

std::optional<std::pair<std::size_t, std::size_t>> findOverlap(
    const std::vector<DecompositionEntry>& entries) {
  // Sweep by top row. Every active entry contains the current row, so the
  // active column intervals are disjoint and a map keyed by left suffices.
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].region.top < entries[b].region.top;
  });
  std::map<Index, std::size_t> active;
  using Expiry = std::pair<Index, std::size_t>;
  std::priority_queue<Expiry, std::vector<Expiry>, std::greater<>> expiry;
  for (const std::size_t i : order) {
    const Region& r = entries[i].region;
    while (!expiry.empty() && expiry.top().first < r.top) {
      const auto it = active.find(entries[expiry.top().second].region.left);
      if (it != active.end() && it->second == expiry.top().second) active.erase(it);
      expiry.pop();
    }
    auto it = active.upper_bound(r.right);
    if (it != active.begin()) {
      --it;
      if (entries[it->second].region.right >= r.left) return std::pair{it->second, i};
    }
    active[r.left] = i;
    expiry.emplace(r.bottom, i);
  }
  return std::nullopt;
}

double hybridCost(const Decomposition& d, const Sheet& sheet, const CostParams& p) {
  for (const auto& e : d.entries) {
    if (!e.region.valid()) throw std::invalid_argument("invalid region " + formatRange(e.region));
  }
  if (const auto o = findOverlap(d.entries)) {
    throw std::invalid_argument("overlapping regions " + formatRange(d.entries[o->first].region) +
                                " and " + formatRange(d.entries[o->second].region));
  }
  std::size_t covered = 0;
  double total = 0;
  for (const auto& e : d.entries) {
    const std::size_t n = sheet.countIn(e.region);
    covered += n;
    switch (e.kind) {
      case ModelKind::ROM:
        total += romCost(e.region.rowCount(), e.region.colCount(), p);
        break;
      case ModelKind::COM:
        total += comCost(e.region.rowCount(), e.region.colCount(), p);
        break;
      case ModelKind::RCV:
        total += rcvCost(static_cast<Index>(n), p);
        break;
      case ModelKind::TOM:
        break;
    }
  }
  if (covered != sheet.size()) {
    throw std::invalid_argument("decomposition leaves " + std::to_string(sheet.size() - covered) +
                                " filled cells uncovered");
  }
  return total;
}

double modeledAccessCost(const Decomposition& d, const std::vector<Region>& footprints,
                         const AccessParams& a) {
  double total = 0;
  for (const auto& f : footprints) {
    std::set<std::size_t> tables;
    bool rcvTouched = false;
    double tuples = 0;
    double cells = 0;
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
      const auto& e = d.entries[i];
      const auto hit = e.region.intersection(f);
      if (!hit) continue;
      switch (e.kind) {
        case ModelKind::ROM:
        case ModelKind::TOM:
          tables.insert(i);
          tuples += static_cast<double>(hit->rowCount());
          cells += static_cast<double>(hit->rowCount() * e.region.colCount());
          break;
        case ModelKind::COM:
          tables.insert(i);
          tuples += static_cast<double>(hit->colCount());
          cells += static_cast<double>(hit->colCount() * e.region.rowCount());
          break;
        case ModelKind::RCV:
          rcvTouched = true;
          tuples += static_cast<double>(hit->area());
          cells += static_cast<double>(hit->area());
          break;
      }
    }
    const double touched = static_cast<double>(tables.size()) + (rcvTouched ? 1 : 0);
    total += touched * a.tableTouchCost + tuples * a.tupleFetchCost + cells * a.cellTransferCost;
  }
  return total;
}

AccessEstimate estimateAccess(Index m, Index n, Index p, Index q, const WorkloadProfile& w) {
  if (m < 1 || n < 1 || p < 1 || p > m || q < 1 || q > n) {
    throw std::out_of_range("tuple shape outside 1..m x 1..n");
  }
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  const double qd = static_cast<double>(q);
  AccessEstimate est;
  est.seeks = w.n1 + w.n2 * nd / qd + w.n3 * md / pd;
  est.transfer = w.n1 * pd * qd + w.n2 * pd * nd + w.n3 * qd * md;
  return est;
}

double tupleShapeObjective(Index m, Index n, Index p, Index q, const WorkloadProfile& w) {
  const auto est = estimateAccess(m, n, p, q, w);
  return w.k * est.seeks + (1 - w.k) * est.transfer;
}

TupleShape tupleShapeOptimize(Index m, Index n, const WorkloadProfile& w) {
  if (m < 1 || n < 1) throw std::out_of_range("sheet dimensions must be positive");
  TupleShape best{1, 1, tupleShapeObjective(m, n, 1, 1, w)};
  for (Index p = 1; p <= m; ++p) {
    for (Index q = 1; q <= n; ++q) {
      const double f = tupleShapeObjective(m, n, p, q, w);
      const bool better = f < best.objective ||
                          (f == best.objective && (p * q < best.p * best.q ||
                                                   (p * q == best.p * best.q && p < best.p)));
      if (better) best = {p, q, f};
    }
  }
  return best;
}

CostConfig parseCostConfig(std::string_view text, CostConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineNo) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    double value = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size() || value < 0) {
      throw std::invalid_argument("line " + std::to_string(lineNo) + ": bad value '" + raw + "'");
    }
    if (key == "s1") {
      base.storage.s1 = value;
    } else if (key == "s2") {
      base.storage.s2 = value;
    } else if (key == "s3") {
      base.storage.s3 = value;
    } else if (key == "s4") {
      base.storage.s4 = value;
    } else if (key == "s5") {
      base.storage.s5 = value;
    } else if (key == "table_touch") {
      base.access.tableTouchCost = value;
    } else if (key == "tuple_fetch") {
      base.access.tupleFetchCost = value;
    } else if (key == "cell_transfer") {
      base.access.cellTransferCost = value;
    } else {
      throw std::invalid_argument("line " + std::to_string(lineNo) + ": unknown key '" + key + "'");
    }
  }
  return base;
}

CostConfig loadCostConfig(const std::string& path, CostConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parseCostConfig(ss.str(), base);
}

}  // namespace gridstore
