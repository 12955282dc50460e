#pragma once

// Conceptual data model: addresses, regions, cell content and sparse sheets.

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gridstore {

using Index = std::int64_t;

/// 1-based (row, column) pair.
struct CellAddress {
  Index row = 1;
  Index col = 1;

  auto operator<=>(const CellAddress&) const = default;
};

/// Inclusive rectangle [top..bottom] x [left..right], 1-based.
struct Region {
  Index top = 1;
  Index left = 1;
  Index bottom = 1;
  Index right = 1;

  static Region cell(CellAddress a) { return {a.row, a.col, a.row, a.col}; }

  Index rowCount() const { return bottom - top + 1; }
  Index colCount() const { return right - left + 1; }
  Index area() const { return rowCount() * colCount(); }
  bool valid() const { return top >= 1 && left >= 1 && top <= bottom && left <= right; }

  bool contains(CellAddress a) const {
    return a.row >= top && a.row <= bottom && a.col >= left && a.col <= right;
  }
  bool contains(const Region& r) const {
    return r.top >= top && r.bottom <= bottom && r.left >= left && r.right <= right;
  }
  bool intersects(const Region& r) const {
    return !(r.bottom < top || r.top > bottom || r.right < left || r.left > right);
  }
  std::optional<Region> intersection(const Region& r) const;

  auto operator<=>(const Region&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::runtime_error(message), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A1 notation. Column letters use bijective base-26 (A=1, Z=26, AA=27).
CellAddress parseA1(std::string_view ref);
std::string formatA1(CellAddress a);
std::string columnLetters(Index col);
Index parseColumnLetters(std::string_view letters);
/// "A1:B3" or a single "A1" (degenerate range).
Region parseRange(std::string_view ref);
std::string formatRange(const Region& r);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Formula cell: source text (beginning with '=') plus its parse.
struct Formula {
  std::string source;
  ExprPtr expr;

  bool operator==(const Formula& o) const { return source == o.source; }
};

struct Empty {
  bool operator==(const Empty&) const = default;
};

/// Content of one cell. Numbers are binary64; text is stored byte-for-byte.
using CellContent = std::variant<Empty, double, std::string, bool, Formula>;

inline bool isEmpty(const CellContent& c) { return std::holds_alternative<Empty>(c); }
inline bool isFormula(const CellContent& c) { return std::holds_alternative<Formula>(c); }

CellContent number(double v);
CellContent text(std::string v);
CellContent boolean(bool v);
/// Parses `source` (must start with '='); throws ParseError.
CellContent formula(std::string source);

std::string describe(const CellContent& c);
/// Typed user input: "" is Empty, a leading '=' is a formula (throws
/// ParseError), TRUE/FALSE (any case) a boolean, a full finite decimal a
/// number, anything else text.
CellContent parseCellInput(std::string_view input);

struct SheetLimits {
  Index maxRows = 2147483647;  // 2^31 - 1
  Index maxCols = Index{1} << 20;
};

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Sparse cell collection. Empty content is never stored.
class Sheet {
 public:
  using CellMap = std::map<CellAddress, CellContent>;

  Sheet() = default;
  explicit Sheet(Index rows, Index cols, SheetLimits limits = {});

  /// Grows declared extents on demand; throws OutOfRange past the limits.
  void set(CellAddress a, CellContent content);
  const CellContent& get(CellAddress a) const;
  bool filled(CellAddress a) const { return cells_.count(a) != 0; }

  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  const CellMap& cells() const { return cells_; }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const SheetLimits& limits() const { return limits_; }
  void resize(Index rows, Index cols);

  /// Largest filled row / column (0 when empty).
  Index maxFilledRow() const;
  Index maxFilledCol() const;

  /// Number of filled cells inside `r`.
  std::size_t countIn(const Region& r) const;

 private:
  CellMap cells_;
  Index rows_ = 0;
  Index cols_ = 0;
  SheetLimits limits_;
};

/// Smallest region containing every filled cell.
std::optional<Region> boundingBox(const Sheet& sheet);

/// Structure-only view used by the optimizer and its oracles.
struct OccupancyMask {
  Index rows = 0;
  Index cols = 0;
  std::vector<CellAddress> filled;

  static OccupancyMask fromSheet(const Sheet& s);
  /// Bit i (row-major over rows x cols) set means filled.
  static OccupancyMask fromBits(Index rows, Index cols, std::uint64_t bits);
  /// Text grid of '0'/'1'/'.' lines; '.' means empty.
  static OccupancyMask parse(std::string_view text);
  Sheet toSheet() const;
};

}  // namespace gridstore
