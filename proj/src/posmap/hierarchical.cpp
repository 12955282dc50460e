#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "gridstore/posmap.hpp"

namespace gridstore {

struct HierarchicalMap::Node {
  bool leaf = true;
  std::vector<ItemId> ids;
  std::vector<std::unique_ptr<Node>> kids;
  std::vector<Index> counts;
  Node* next = nullptr;

  std::size_t fanout() const { return leaf ? ids.size() : kids.size(); }
  Index total() const {
    return leaf ? static_cast<Index>(ids.size()) : std::accumulate(counts.begin(), counts.end(), Index{0});
  }
};

namespace {

using NodePtr = std::unique_ptr<HierarchicalMap::Node>;

std::size_t minFill(int order) { return static_cast<std::size_t>((order + 1) / 2); }

// Evenly splits n items into ceil(n/cap) groups.
std::vector<std::size_t> groupSizes(std::size_t n, std::size_t cap) {
  const std::size_t groups = (n + cap - 1) / cap;
  std::vector<std::size_t> sizes(groups, n / groups);
  for (std::size_t i = 0; i < n % groups; ++i) ++sizes[i];
  return sizes;
}

}  // namespace

HierarchicalMap::HierarchicalMap(int order) : order_(order), root_(std::make_unique<Node>()) {
  if (order < 4 || order > 1024) throw std::invalid_argument("order must be in 4..1024");
}

HierarchicalMap::HierarchicalMap(const std::vector<ItemId>& ids, int order) : HierarchicalMap(order) {
  if (ids.empty()) return;
  const auto cap = static_cast<std::size_t>(order_);
  std::vector<NodePtr> level;
  std::size_t at = 0;
  Node* prev = nullptr;
  for (const std::size_t n : groupSizes(ids.size(), cap)) {
    auto leaf = std::make_unique<Node>();
    leaf->ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(at),
                     ids.begin() + static_cast<std::ptrdiff_t>(at + n));
    at += n;
    if (prev) prev->next = leaf.get();
    prev = leaf.get();
    level.push_back(std::move(leaf));
  }
  while (level.size() > 1) {
    std::vector<NodePtr> up;
    std::size_t k = 0;
    for (const std::size_t n : groupSizes(level.size(), cap)) {
      auto node = std::make_unique<Node>();
      node->leaf = false;
      for (std::size_t i = 0; i < n; ++i, ++k) {
        node->counts.push_back(level[k]->total());
        node->kids.push_back(std::move(level[k]));
      }
      up.push_back(std::move(node));
    }
    level = std::move(up);
  }
  root_ = std::move(level.front());
}

HierarchicalMap::~HierarchicalMap() = default;
HierarchicalMap::HierarchicalMap(HierarchicalMap&&) noexcept = default;
HierarchicalMap& HierarchicalMap::operator=(HierarchicalMap&&) noexcept = default;

HierarchicalMap::HierarchicalMap(const HierarchicalMap& other) : order_(other.order_) {
  Node* prevLeaf = nullptr;
  std::function<NodePtr(const Node&)> copy = [&](const Node& n) {
    auto c = std::make_unique<Node>();
    c->leaf = n.leaf;
    c->ids = n.ids;
    c->counts = n.counts;
    for (const auto& k : n.kids) c->kids.push_back(copy(*k));
    if (c->leaf) {
      if (prevLeaf) prevLeaf->next = c.get();
      prevLeaf = c.get();
    }
    return c;
  };
  root_ = copy(*other.root_);
}

HierarchicalMap& HierarchicalMap::operator=(const HierarchicalMap& other) {
  if (this != &other) *this = HierarchicalMap(other);
  return *this;
}

std::unique_ptr<PositionalMap> HierarchicalMap::clone() const {
  return std::make_unique<HierarchicalMap>(*this);
}

Index HierarchicalMap::size() const { return root_->total(); }

int HierarchicalMap::height() const {
  int h = 1;
  for (const Node* n = root_.get(); !n->leaf; n = n->kids.front().get()) ++h;
  return h;
}

int HierarchicalMap::heightBound(Index n, int order) {
  if (n <= 1) return 1;
  const double base = static_cast<double>(minFill(order));
  // Integer ceiling of log_base(n), robust to floating error.
  int h = 0;
  for (double reach = 1; reach < static_cast<double>(n); reach *= base) ++h;
  return h + 1;
}

void HierarchicalMap::insertAt(Index pos, ItemId id) {
  const Index n = size();
  if (pos < 1 || pos > n + 1) throw std::out_of_range("insert position out of range");
  stats_ = {};
  const auto cap = static_cast<std::size_t>(order_);
  std::function<NodePtr(Node&, Index)> rec = [&](Node& node, Index p) -> NodePtr {
    ++stats_.nodeVisits;
    if (node.leaf) {
      node.ids.insert(node.ids.begin() + p, id);
      ++stats_.elementsScanned;
      if (node.ids.size() <= cap) return nullptr;
      auto right = std::make_unique<Node>();
      const std::size_t half = node.ids.size() / 2;
      right->ids.assign(node.ids.begin() + static_cast<std::ptrdiff_t>(half), node.ids.end());
      node.ids.resize(half);
      right->next = node.next;
      node.next = right.get();
      return right;
    }
    std::size_t i = 0;
    while (i + 1 < node.kids.size() && p > node.counts[i]) p -= node.counts[i++];
    ++node.counts[i];
    auto split = rec(*node.kids[i], p);
    if (!split) return nullptr;
    node.counts[i] = node.kids[i]->total();
    node.counts.insert(node.counts.begin() + static_cast<std::ptrdiff_t>(i + 1), split->total());
    node.kids.insert(node.kids.begin() + static_cast<std::ptrdiff_t>(i + 1), std::move(split));
    if (node.kids.size() <= cap) return nullptr;
    auto right = std::make_unique<Node>();
    right->leaf = false;
    const auto half = static_cast<std::ptrdiff_t>(node.kids.size() / 2);
    std::move(node.kids.begin() + half, node.kids.end(), std::back_inserter(right->kids));
    right->counts.assign(node.counts.begin() + half, node.counts.end());
    node.kids.resize(static_cast<std::size_t>(half));
    node.counts.resize(static_cast<std::size_t>(half));
    return right;
  };
  if (auto split = rec(*root_, pos - 1)) {
    auto top = std::make_unique<Node>();
    top->leaf = false;
    top->counts = {root_->total(), split->total()};
    top->kids.push_back(std::move(root_));
    top->kids.push_back(std::move(split));
    root_ = std::move(top);
  }
}

ItemId HierarchicalMap::deleteAt(Index pos) {
  if (pos < 1 || pos > size()) throw std::out_of_range("delete position out of range");
  stats_ = {};
  const std::size_t low = minFill(order_);
  // Restores the fill of parent.kids[i] by borrowing from or merging with a sibling.
  auto repair = [&](Node& parent, std::size_t i) {
    Node& kid = *parent.kids[i];
    if (kid.fanout() >= low) return;
    if (i > 0 && parent.kids[i - 1]->fanout() > low) {
      Node& left = *parent.kids[i - 1];
      if (kid.leaf) {
        kid.ids.insert(kid.ids.begin(), left.ids.back());
        left.ids.pop_back();
        --parent.counts[i - 1];
        ++parent.counts[i];
      } else {
        const Index c = left.counts.back();
        kid.kids.insert(kid.kids.begin(), std::move(left.kids.back()));
        kid.counts.insert(kid.counts.begin(), c);
        left.kids.pop_back();
        left.counts.pop_back();
        parent.counts[i - 1] -= c;
        parent.counts[i] += c;
      }
      return;
    }
    if (i + 1 < parent.kids.size() && parent.kids[i + 1]->fanout() > low) {
      Node& right = *parent.kids[i + 1];
      if (kid.leaf) {
        kid.ids.push_back(right.ids.front());
        right.ids.erase(right.ids.begin());
        --parent.counts[i + 1];
        ++parent.counts[i];
      } else {
        const Index c = right.counts.front();
        kid.kids.push_back(std::move(right.kids.front()));
        kid.counts.push_back(c);
        right.kids.erase(right.kids.begin());
        right.counts.erase(right.counts.begin());
        parent.counts[i + 1] -= c;
        parent.counts[i] += c;
      }
      return;
    }
    const std::size_t j = i > 0 ? i - 1 : i;  // merge kids[j + 1] into kids[j]
    Node& left = *parent.kids[j];
    Node& right = *parent.kids[j + 1];
    if (left.leaf) {
      left.ids.insert(left.ids.end(), right.ids.begin(), right.ids.end());
      left.next = right.next;
    } else {
      std::move(right.kids.begin(), right.kids.end(), std::back_inserter(left.kids));
      left.counts.insert(left.counts.end(), right.counts.begin(), right.counts.end());
    }
    parent.counts[j] += parent.counts[j + 1];
    parent.kids.erase(parent.kids.begin() + static_cast<std::ptrdiff_t>(j + 1));
    parent.counts.erase(parent.counts.begin() + static_cast<std::ptrdiff_t>(j + 1));
  };
  std::function<ItemId(Node&, Index)> rec = [&](Node& node, Index p) -> ItemId {
    ++stats_.nodeVisits;
    if (node.leaf) {
      ++stats_.elementsScanned;
      const ItemId id = node.ids[static_cast<std::size_t>(p)];
      node.ids.erase(node.ids.begin() + p);
      return id;
    }
    std::size_t i = 0;
    while (p >= node.counts[i]) p -= node.counts[i++];
    --node.counts[i];
    const ItemId id = rec(*node.kids[i], p);
    repair(node, i);
    return id;
  };
  const ItemId id = rec(*root_, pos - 1);
  if (!root_->leaf && root_->kids.size() == 1) root_ = std::move(root_->kids.front());
  return id;
}

ItemId HierarchicalMap::lookup(Index pos) const {
  if (pos < 1 || pos > size()) throw std::out_of_range("lookup position out of range");
  return lookupRange(pos, 1).front();
}

std::vector<ItemId> HierarchicalMap::lookupRange(Index pos, Index count) const {
  if (count < 0 || pos < 1 || pos - 1 + count > size() || (count > 0 && pos > size())) {
    throw std::out_of_range("lookup range out of range");
  }
  stats_ = {};
  std::vector<ItemId> out;
  if (count == 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  const Node* node = root_.get();
  Index p = pos - 1;
  while (true) {
    ++stats_.nodeVisits;
    if (node->leaf) break;
    std::size_t i = 0;
    while (p >= node->counts[i]) p -= node->counts[i++];
    node = node->kids[i].get();
  }
  auto at = static_cast<std::size_t>(p);
  while (true) {
    for (; at < node->ids.size() && static_cast<Index>(out.size()) < count; ++at) {
      out.push_back(node->ids[at]);
    }
    if (static_cast<Index>(out.size()) == count) break;
    node = node->next;
    at = 0;
    ++stats_.nodeVisits;
  }
  stats_.elementsScanned = static_cast<std::uint64_t>(count);
  return out;
}

InvariantReport HierarchicalMap::checkInvariants() const {
  const auto cap = static_cast<std::size_t>(order_);
  const std::size_t low = minFill(order_);
  int leafDepth = -1;
  std::vector<const Node*> leaves;
  std::string problem;
  std::function<void(const Node&, int, const std::string&)> walk = [&](const Node& n, int depth,
                                                                       const std::string& path) {
    if (!problem.empty()) return;
    const bool isRoot = depth == 0;
    const std::string where = "node " + (path.empty() ? std::string("root") : path);
    if (n.fanout() > cap) {
      problem = where + " has " + std::to_string(n.fanout()) + " entries, more than the order";
      return;
    }
    if (!isRoot && n.fanout() < low) {
      problem = where + " is underfull (" + std::to_string(n.fanout()) + " entries)";
      return;
    }
    if (n.leaf) {
      if (leafDepth < 0) leafDepth = depth;
      if (depth != leafDepth) {
        problem = where + " is a leaf at depth " + std::to_string(depth) + ", expected " +
                  std::to_string(leafDepth);
        return;
      }
      leaves.push_back(&n);
      return;
    }
    if (isRoot && n.kids.size() < 2) {
      problem = "root has fewer than two children";
      return;
    }
    if (n.counts.size() != n.kids.size()) {
      problem = where + " has mismatched count and child arrays";
      return;
    }
    for (std::size_t i = 0; i < n.kids.size(); ++i) {
      const Index actual = n.kids[i]->total();
      if (actual != n.counts[i]) {
        problem = where + " records count " + std::to_string(n.counts[i]) + " for child " +
                  std::to_string(i) + " holding " + std::to_string(actual);
        return;
      }
      walk(*n.kids[i], depth + 1, path.empty() ? std::to_string(i) : path + "/" + std::to_string(i));
    }
  };
  walk(*root_, 0, "");
  if (problem.empty()) {
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Node* expect = i + 1 < leaves.size() ? leaves[i + 1] : nullptr;
      if (leaves[i]->next != expect) {
        problem = "leaf chain broken after leaf " + std::to_string(i);
        break;
      }
    }
  }
  if (problem.empty() && height() > heightBound(size(), order_)) problem = "height exceeds bound";
  return {problem.empty(), problem};
}

void HierarchicalMap::corruptCountForTesting(std::size_t child, Index delta) {
  if (root_->leaf) throw std::logic_error("root is a leaf");
  root_->counts.at(child) += delta;
}

}  // namespace gridstore
