#include "gridstore/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gridstore/formula.hpp"

namespace gridstore {

std::optional<Region> Region::intersection(const Region& r) const {
  if (!intersects(r)) return std::nullopt;
  return Region{std::max(top, r.top), std::max(left, r.left), std::min(bottom, r.bottom),
                std::min(right, r.right)};
}

std::string columnLetters(Index col) {
  if (col < 1) throw OutOfRange("column must be >= 1");
  std::string out;
  while (col > 0) {
    const Index rem = (col - 1) % 26;
    out.push_back(static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

Index parseColumnLetters(std::string_view letters) {
  if (letters.empty()) throw ParseError("missing column letters", 0);
  Index col = 0;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(letters[i])));
    if (c < 'A' || c > 'Z') throw ParseError("bad column letter in '" + std::string(letters) + "'", i);
    col = col * 26 + (c - 'A' + 1);
    if (col > (Index{1} << 40)) throw ParseError("column out of range: '" + std::string(letters) + "'", i);
  }
  return col;
}

CellAddress parseA1(std::string_view ref) {
  std::size_t i = 0;
  if (i < ref.size() && ref[i] == '$') ++i;
  const std::size_t letterStart = i;
  while (i < ref.size() && std::isalpha(static_cast<unsigned char>(ref[i]))) ++i;
  const std::size_t letterEnd = i;
  if (i < ref.size() && ref[i] == '$') ++i;
  const std::size_t digitStart = i;
  while (i < ref.size() && std::isdigit(static_cast<unsigned char>(ref[i]))) ++i;
  if (letterEnd == letterStart || digitStart == i || i != ref.size()) {
    throw ParseError("malformed cell reference '" + std::string(ref) + "'", 0);
  }
  const Index col = parseColumnLetters(ref.substr(letterStart, letterEnd - letterStart));
  Index row = 0;
  for (std::size_t k = digitStart; k < i; ++k) {
    row = row * 10 + (ref[k] - '0');
    if (row > (Index{1} << 40)) throw ParseError("row out of range in '" + std::string(ref) + "'", k);
  }
  if (row < 1) throw ParseError("row must be >= 1 in '" + std::string(ref) + "'", digitStart);
  return {row, col};
}

std::string formatA1(CellAddress a) { return columnLetters(a.col) + std::to_string(a.row); }

Region parseRange(std::string_view ref) {
  const auto colon = ref.find(':');
  if (colon == std::string_view::npos) return Region::cell(parseA1(ref));
  const CellAddress a = parseA1(ref.substr(0, colon));
  const CellAddress b = parseA1(ref.substr(colon + 1));
  return {std::min(a.row, b.row), std::min(a.col, b.col), std::max(a.row, b.row),
          std::max(a.col, b.col)};
}

std::string formatRange(const Region& r) {
  if (r.top == r.bottom && r.left == r.right) return formatA1({r.top, r.left});
  return formatA1({r.top, r.left}) + ":" + formatA1({r.bottom, r.right});
}

CellContent number(double v) { return v; }
CellContent text(std::string v) { return v; }
CellContent boolean(bool v) { return v; }
CellContent formula(std::string source) {
  auto expr = parseFormula(source);
  return Formula{std::move(source), std::move(expr)};
}

CellContent parseCellInput(std::string_view input) {
  if (input.empty()) return Empty{};
  if (input[0] == '=') return formula(std::string(input));
  std::string upper(input);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "TRUE") return boolean(true);
  if (upper == "FALSE") return boolean(false);
  double v = 0;
  const auto [end, ec] = std::from_chars(input.data(), input.data() + input.size(), v);
  if (ec == std::errc() && end == input.data() + input.size() && std::isfinite(v)) return number(v);
  return text(std::string(input));
}

std::string describe(const CellContent& c) {
  struct Visitor {
    std::string operator()(const Empty&) const { return "<empty>"; }
    std::string operator()(double d) const {
      std::ostringstream os;
      os.precision(17);
      os << d;
      return os.str();
    }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
    std::string operator()(const Formula& f) const { return f.source; }
  };
  return std::visit(Visitor{}, c);
}

Sheet::Sheet(Index rows, Index cols, SheetLimits limits) : limits_(limits) { resize(rows, cols); }

void Sheet::resize(Index rows, Index cols) {
  if (rows < 0 || cols < 0 || rows > limits_.maxRows || cols > limits_.maxCols) {
    throw OutOfRange("sheet extents exceed configured maxima");
  }
  rows_ = rows;
  cols_ = cols;
  for (auto it = cells_.begin(); it != cells_.end();) {
    if (it->first.row > rows_ || it->first.col > cols_) {
      it = cells_.erase(it);
    } else {
      ++it;
    }
  }
}

void Sheet::set(CellAddress a, CellContent content) {
  if (a.row < 1 || a.col < 1 || a.row > limits_.maxRows || a.col > limits_.maxCols) {
    throw OutOfRange("address " + std::to_string(a.row) + "," + std::to_string(a.col) +
                     " beyond sheet limits");
  }
  if (isEmpty(content)) {
    cells_.erase(a);
    return;
  }
  rows_ = std::max(rows_, a.row);
  cols_ = std::max(cols_, a.col);
  cells_[a] = std::move(content);
}

const CellContent& Sheet::get(CellAddress a) const {
  static const CellContent kEmpty = Empty{};
  const auto it = cells_.find(a);
  return it == cells_.end() ? kEmpty : it->second;
}

Index Sheet::maxFilledRow() const { return cells_.empty() ? 0 : cells_.rbegin()->first.row; }

Index Sheet::maxFilledCol() const {
  Index best = 0;
  for (const auto& [a, c] : cells_) best = std::max(best, a.col);
  return best;
}

std::size_t Sheet::countIn(const Region& r) const {
  std::size_t n = 0;
  auto it = cells_.lower_bound({r.top, r.left});
  while (it != cells_.end() && it->first.row <= r.bottom) {
    const auto [row, col] = it->first;
    if (col < r.left) {
      it = cells_.lower_bound({row, r.left});
    } else if (col > r.right) {
      it = cells_.lower_bound({row + 1, r.left});
    } else {
      ++n;
      ++it;
    }
  }
  return n;
}

std::optional<Region> boundingBox(const Sheet& sheet) {
  if (sheet.empty()) return std::nullopt;
  Region box{sheet.cells().begin()->first.row, sheet.cells().begin()->first.col,
             sheet.cells().rbegin()->first.row, sheet.cells().begin()->first.col};
  for (const auto& [a, c] : sheet.cells()) {
    box.left = std::min(box.left, a.col);
    box.right = std::max(box.right, a.col);
  }
  return box;
}

OccupancyMask OccupancyMask::fromSheet(const Sheet& s) {
  OccupancyMask m;
  m.rows = s.rows();
  m.cols = s.cols();
  m.filled.reserve(s.size());
  for (const auto& [a, c] : s.cells()) m.filled.push_back(a);
  return m;
}

OccupancyMask OccupancyMask::fromBits(Index rows, Index cols, std::uint64_t bits) {
  OccupancyMask m;
  m.rows = rows;
  m.cols = cols;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (bits >> (r * cols + c) & 1U) m.filled.push_back({r + 1, c + 1});
    }
  }
  return m;
}

OccupancyMask OccupancyMask::parse(std::string_view text) {
  OccupancyMask m;
  Index row = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    ++row;
    for (std::size_t c = 0; c < line.size(); ++c) {
      const char ch = line[c];
      if (ch == '1') {
        m.filled.push_back({row, static_cast<Index>(c) + 1});
      } else if (ch != '0' && ch != '.') {
        throw ParseError("mask characters must be 0, 1 or '.'", c);
      }
    }
    m.cols = std::max(m.cols, static_cast<Index>(line.size()));
  }
  m.rows = row;
  return m;
}

Sheet OccupancyMask::toSheet() const {
  Sheet s(rows, cols);
  for (const auto& a : filled) s.set(a, 1.0);
  return s;
}

}  // namespace gridstore
