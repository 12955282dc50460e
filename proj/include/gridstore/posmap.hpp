#pragma once

// Positional mapping: display position (1-based, contiguous) to opaque
// stored identifier.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gridstore/core.hpp"

namespace gridstore {

using ItemId = std::uint64_t;

/// Work done by the last operation.
struct OpStats {
  std::uint64_t nodeVisits = 0;
  std::uint64_t elementsScanned = 0;
};

struct InvariantReport {
  bool ok = true;
  std::string message;
};

/// Errors are std::out_of_range for positions outside the valid range.
class PositionalMap {
 public:
  virtual ~PositionalMap() = default;
  virtual void insertAt(Index pos, ItemId id) = 0;
  virtual ItemId deleteAt(Index pos) = 0;
  virtual ItemId lookup(Index pos) const = 0;
  virtual std::vector<ItemId> lookupRange(Index pos, Index count) const = 0;
  virtual Index size() const = 0;
  virtual InvariantReport checkInvariants() const = 0;
  virtual std::string_view name() const = 0;
  virtual std::unique_ptr<PositionalMap> clone() const = 0;
  const OpStats& opStats() const { return stats_; }

  std::vector<ItemId> toVector() const;

 protected:
  mutable OpStats stats_;
};

/// Counted B+tree: internal nodes keep per-child subtree counts, leaves keep
/// runs of up to m identifiers and are chained left to right.
class HierarchicalMap final : public PositionalMap {
 public:
  static constexpr int kDefaultOrder = 32;

  explicit HierarchicalMap(int order = kDefaultOrder);
  /// Bottom-up build; every leaf and internal node holds ceil(m/2)..m entries
  /// (the root excepted).
  HierarchicalMap(const std::vector<ItemId>& ids, int order = kDefaultOrder);
  ~HierarchicalMap() override;
  HierarchicalMap(const HierarchicalMap& other);
  HierarchicalMap& operator=(const HierarchicalMap& other);
  HierarchicalMap(HierarchicalMap&&) noexcept;
  HierarchicalMap& operator=(HierarchicalMap&&) noexcept;

  void insertAt(Index pos, ItemId id) override;
  ItemId deleteAt(Index pos) override;
  ItemId lookup(Index pos) const override;
  std::vector<ItemId> lookupRange(Index pos, Index count) const override;
  Index size() const override;
  InvariantReport checkInvariants() const override;
  std::string_view name() const override { return "hierarchical"; }
  std::unique_ptr<PositionalMap> clone() const override;

  int order() const { return order_; }
  int height() const;
  /// ceil(log_{ceil(m/2)} N) + 1
  static int heightBound(Index n, int order);

  /// Adds delta to the stored count of the root's child i (fault injection).
  void corruptCountForTesting(std::size_t child, Index delta);

 struct Node;  // defined in the implementation

 private:
  int order_;
  std::unique_ptr<Node> root_;
};

/// Sorted gapped 64-bit keys; positional lookup walks the key order from the
/// start, as an index scan would.
class MonotonicMap final : public PositionalMap {
 public:
  static constexpr std::uint64_t kDefaultGap = std::uint64_t{1} << 16;

  explicit MonotonicMap(std::uint64_t gap = kDefaultGap);
  explicit MonotonicMap(const std::vector<ItemId>& ids, std::uint64_t gap = kDefaultGap);

  void insertAt(Index pos, ItemId id) override;
  ItemId deleteAt(Index pos) override;
  ItemId lookup(Index pos) const override;
  std::vector<ItemId> lookupRange(Index pos, Index count) const override;
  Index size() const override { return static_cast<Index>(keys_.size()); }
  InvariantReport checkInvariants() const override;
  std::string_view name() const override { return "monotonic"; }
  std::unique_ptr<PositionalMap> clone() const override;

  /// Keys reassigned by renumbering since construction.
  std::uint64_t renumbered() const { return renumbered_; }

 private:
  using Keys = std::map<std::uint64_t, ItemId>;
  Keys::iterator at(Index pos0) const;
  void renumberAround(Keys::iterator it);

  std::uint64_t gap_;
  mutable Keys keys_;
  std::uint64_t renumbered_ = 0;
};

/// Each record stores its position; an insert or delete renumbers every
/// later record.
class DirectMap final : public PositionalMap {
 public:
  DirectMap() = default;
  explicit DirectMap(const std::vector<ItemId>& ids);
  void insertAt(Index pos, ItemId id) override;
  ItemId deleteAt(Index pos) override;
  ItemId lookup(Index pos) const override;
  std::vector<ItemId> lookupRange(Index pos, Index count) const override;
  Index size() const override { return static_cast<Index>(records_.size()); }
  InvariantReport checkInvariants() const override;
  std::string_view name() const override { return "direct"; }
  std::unique_ptr<PositionalMap> clone() const override;

 private:
  struct Record {
    Index position;
    ItemId id;
  };
  std::vector<Record> records_;
};

enum class PosMapKind { Hierarchical, Monotonic, Direct };
std::string_view posMapKindName(PosMapKind k);
PosMapKind parsePosMapKind(std::string_view s);
std::unique_ptr<PositionalMap> makePositionalMap(PosMapKind k,
                                                 const std::vector<ItemId>& ids = {});

/// Count then zigzag delta varints of the in-order sequence.
std::string encodeIds(const std::vector<ItemId>& ids);
/// Throws std::invalid_argument on truncated or malformed input.
std::vector<ItemId> decodeIds(std::string_view bytes);

}  // namespace gridstore
