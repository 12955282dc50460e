#include <limits>
#include <stdexcept>

#include "gridstore/posmap.hpp"

namespace gridstore {

std::vector<ItemId> PositionalMap::toVector() const { return lookupRange(1, size()); }

namespace {

void checkRange(Index pos, Index count, Index n) {
  if (count < 0 || pos < 1 || pos - 1 + count > n || (count > 0 && pos > n)) {
    throw std::out_of_range("position range out of range");
  }
}

}  // namespace

// ---- MonotonicMap --------------------------------------------------------

MonotonicMap::MonotonicMap(std::uint64_t gap) : gap_(gap) {
  if (gap < 2) throw std::invalid_argument("gap must be at least 2");
}

MonotonicMap::MonotonicMap(const std::vector<ItemId>& ids, std::uint64_t gap) : MonotonicMap(gap) {
  std::uint64_t key = 0;
  for (const ItemId id : ids) {
    key += gap_;
    keys_.emplace_hint(keys_.end(), key, id);
  }
}

std::unique_ptr<PositionalMap> MonotonicMap::clone() const { return std::make_unique<MonotonicMap>(*this); }

MonotonicMap::Keys::iterator MonotonicMap::at(Index pos0) const {
  auto it = keys_.begin();
  for (Index i = 0; i < pos0; ++i) ++it;
  stats_.elementsScanned += static_cast<std::uint64_t>(pos0) + 1;
  return it;
}

void MonotonicMap::renumberAround(Keys::iterator it) {
  constexpr std::uint64_t top = std::numeric_limits<std::uint64_t>::max();
  auto first = it;
  auto last = it;  // one past the window
  std::uint64_t count = 0;
  std::uint64_t before = 0;  // window elements ahead of the insertion point
  for (std::uint64_t w = 1;; w *= 2) {
    for (std::uint64_t k = 0; k < w && first != keys_.begin(); ++k, ++count, ++before) --first;
    for (std::uint64_t k = 0; k < w && last != keys_.end(); ++k, ++count) ++last;
    const std::uint64_t lo = first == keys_.begin() ? 0 : std::prev(first)->first;
    const std::uint64_t hi = last == keys_.end() ? top : last->first;
    // count existing keys plus the pending one need count + 2 intervals of >= 2.
    if (hi - lo >= 2 * (count + 2)) {
      const std::uint64_t step = (hi - lo) / (count + 2);
      std::vector<Keys::node_type> nodes;
      for (auto i = first; i != last;) nodes.push_back(keys_.extract(i++));
      for (std::uint64_t k = 0; k < nodes.size(); ++k) {
        nodes[k].key() = lo + step * (k < before ? k + 1 : k + 2);
        keys_.insert(std::move(nodes[k]));
      }
      renumbered_ += count;
      stats_.elementsScanned += count;
      return;
    }
    if (first == keys_.begin() && last == keys_.end()) throw std::length_error("key space exhausted");
  }
}

void MonotonicMap::insertAt(Index pos, ItemId id) {
  const Index n = size();
  if (pos < 1 || pos > n + 1) throw std::out_of_range("insert position out of range");
  stats_ = {};
  constexpr std::uint64_t top = std::numeric_limits<std::uint64_t>::max();
  for (int attempt = 0; attempt < 2; ++attempt) {
    // Appends go straight to the largest key, as with an ascending sequence.
    const auto succ = pos == n + 1 ? keys_.end() : at(pos - 1);
    const std::uint64_t lo = succ == keys_.begin() ? 0 : std::prev(succ)->first;
    std::uint64_t key = 0;
    if (succ == keys_.end()) {
      key = top - lo > gap_ ? lo + gap_ : lo + (top - lo) / 2;
      if (key == lo) key = 0;
    } else if (succ->first - lo >= 2) {
      key = lo + (succ->first - lo) / 2;
    }
    if (key != 0) {
      keys_.emplace_hint(succ, key, id);
      ++stats_.elementsScanned;
      return;
    }
    renumberAround(succ);
  }
  throw std::logic_error("renumbering failed to open a gap");
}

ItemId MonotonicMap::deleteAt(Index pos) {
  checkRange(pos, 1, size());
  stats_ = {};
  const auto it = at(pos - 1);
  const ItemId id = it->second;
  keys_.erase(it);
  return id;
}

ItemId MonotonicMap::lookup(Index pos) const {
  checkRange(pos, 1, size());
  stats_ = {};
  return at(pos - 1)->second;
}

std::vector<ItemId> MonotonicMap::lookupRange(Index pos, Index count) const {
  checkRange(pos, count, size());
  stats_ = {};
  std::vector<ItemId> out;
  if (count == 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  auto it = at(pos - 1);
  for (Index i = 0; i < count; ++i, ++it) out.push_back(it->second);
  stats_.elementsScanned += static_cast<std::uint64_t>(count) - 1;
  return out;
}

InvariantReport MonotonicMap::checkInvariants() const {
  if (!keys_.empty() && keys_.begin()->first == 0) return {false, "key 0 is reserved"};
  return {};
}

// ---- DirectMap -----------------------------------------------------------

DirectMap::DirectMap(const std::vector<ItemId>& ids) {
  records_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) records_.push_back({static_cast<Index>(i + 1), ids[i]});
}

std::unique_ptr<PositionalMap> DirectMap::clone() const { return std::make_unique<DirectMap>(*this); }

void DirectMap::insertAt(Index pos, ItemId id) {
  if (pos < 1 || pos > size() + 1) throw std::out_of_range("insert position out of range");
  stats_ = {};
  const auto at = static_cast<std::size_t>(pos - 1);
  records_.insert(records_.begin() + static_cast<std::ptrdiff_t>(at), Record{pos, id});
  for (std::size_t i = at + 1; i < records_.size(); ++i) ++records_[i].position;
  stats_.elementsScanned = records_.size() - at;
}

ItemId DirectMap::deleteAt(Index pos) {
  checkRange(pos, 1, size());
  stats_ = {};
  const auto at = static_cast<std::size_t>(pos - 1);
  const ItemId id = records_[at].id;
  records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(at));
  for (std::size_t i = at; i < records_.size(); ++i) --records_[i].position;
  stats_.elementsScanned = records_.size() - at + 1;
  return id;
}

ItemId DirectMap::lookup(Index pos) const {
  checkRange(pos, 1, size());
  stats_ = {0, 1};
  return records_[static_cast<std::size_t>(pos - 1)].id;
}

std::vector<ItemId> DirectMap::lookupRange(Index pos, Index count) const {
  checkRange(pos, count, size());
  stats_ = {0, static_cast<std::uint64_t>(count)};
  std::vector<ItemId> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(records_[static_cast<std::size_t>(pos - 1 + i)].id);
  return out;
}

InvariantReport DirectMap::checkInvariants() const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].position != static_cast<Index>(i + 1)) {
      return {false, "record " + std::to_string(i) + " stores position " +
                         std::to_string(records_[i].position)};
    }
  }
  return {};
}

// ---- Factory and serialization ---------------------------------------------

std::string_view posMapKindName(PosMapKind k) {
  switch (k) {
    case PosMapKind::Hierarchical:
      return "hierarchical";
    case PosMapKind::Monotonic:
      return "monotonic";
    case PosMapKind::Direct:
      return "direct";
  }
  return "?";
}

PosMapKind parsePosMapKind(std::string_view s) {
  if (s == "hierarchical") return PosMapKind::Hierarchical;
  if (s == "monotonic") return PosMapKind::Monotonic;
  if (s == "direct") return PosMapKind::Direct;
  throw std::invalid_argument("unknown positional map '" + std::string(s) + "'");
}

std::unique_ptr<PositionalMap> makePositionalMap(PosMapKind k, const std::vector<ItemId>& ids) {
  switch (k) {
    case PosMapKind::Hierarchical:
      return std::make_unique<HierarchicalMap>(ids);
    case PosMapKind::Monotonic:
      return std::make_unique<MonotonicMap>(ids);
    case PosMapKind::Direct:
      return std::make_unique<DirectMap>(ids);
  }
  throw std::invalid_argument("unknown positional map kind");
}

namespace {

void putVarint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

std::uint64_t getVarint(std::string_view bytes, std::size_t& at) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (at >= bytes.size()) throw std::invalid_argument("truncated varint");
    const auto byte = static_cast<unsigned char>(bytes[at++]);
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if (!(byte & 0x80)) return v;
  }
  throw std::invalid_argument("varint too long");
}

}  // namespace

std::string encodeIds(const std::vector<ItemId>& ids) {
  std::string out;
  putVarint(out, ids.size());
  ItemId prev = 0;
  for (const ItemId id : ids) {
    const auto delta = static_cast<std::int64_t>(id - prev);
    putVarint(out, (static_cast<std::uint64_t>(delta) << 1) ^ static_cast<std::uint64_t>(delta >> 63));
    prev = id;
  }
  return out;
}

std::vector<ItemId> decodeIds(std::string_view bytes) {
  std::size_t at = 0;
  const std::uint64_t n = getVarint(bytes, at);
  if (n > bytes.size()) throw std::invalid_argument("identifier count exceeds payload");
  std::vector<ItemId> ids;
  ids.reserve(static_cast<std::size_t>(n));
  ItemId prev = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t z = getVarint(bytes, at);
    const std::uint64_t delta = (z >> 1) ^ (~(z & 1) + 1);
    prev += delta;
    ids.push_back(prev);
  }
  if (at != bytes.size()) throw std::invalid_argument("trailing bytes after identifiers");
  return ids;
}

}  // namespace gridstore
