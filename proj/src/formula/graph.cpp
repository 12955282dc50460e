#include <algorithm>

#include "gridstore/formula.hpp"

namespace gridstore {

namespace {

template <typename Map, typename Fn>
void forEachKeyIn(const Map& m, const Region& r, Fn&& fn) {
  auto it = m.lower_bound({r.top, r.left});
  while (it != m.end() && it->first.row <= r.bottom) {
    const auto [row, col] = it->first;
    if (col < r.left) {
      it = m.lower_bound({row, r.left});
    } else if (col > r.right) {
      it = m.lower_bound({row + 1, r.left});
    } else {
      fn(it->first);
      ++it;
    }
  }
}

bool isSingleCell(const Region& r) { return r.top == r.bottom && r.left == r.right; }

}  // namespace

const std::vector<Region>& DependencyGraph::precedents(CellAddress cell) const {
  static const std::vector<Region> kNone;
  const auto it = forward_.find(cell);
  return it == forward_.end() ? kNone : it->second;
}

bool DependencyGraph::reaches(CellAddress from, const std::vector<Region>& precedentsOfTarget,
                              CellAddress target) const {
  (void)from;
  // DFS backwards through precedents: a cycle exists iff `target` is
  // reachable from its own new precedents.
  std::vector<Region> stack(precedentsOfTarget.begin(), precedentsOfTarget.end());
  std::set<CellAddress> seen;
  while (!stack.empty()) {
    const Region r = stack.back();
    stack.pop_back();
    if (r.contains(target)) return true;
    forEachKeyIn(forward_, r, [&](CellAddress f) {
      if (f == target || !seen.insert(f).second) return;
      const auto& p = forward_.at(f);
      stack.insert(stack.end(), p.begin(), p.end());
    });
  }
  return false;
}

void DependencyGraph::index(CellAddress cell, const std::vector<Region>& regs) {
  for (const auto& r : regs) {
    if (isSingleCell(r)) {
      cellDependents_[{r.top, r.left}].insert(cell);
    } else {
      rangeDependents_.emplace_back(r, cell);
    }
  }
}

void DependencyGraph::unindex(CellAddress cell, const std::vector<Region>& regs) {
  for (const auto& r : regs) {
    if (isSingleCell(r)) {
      auto it = cellDependents_.find({r.top, r.left});
      if (it != cellDependents_.end()) {
        it->second.erase(cell);
        if (it->second.empty()) cellDependents_.erase(it);
      }
    }
  }
  std::erase_if(rangeDependents_, [&](const auto& e) { return e.second == cell; });
}

void DependencyGraph::setFormula(CellAddress cell, const Expr& expr) {
  std::vector<Region> regs = references(expr);
  if (reaches(cell, regs, cell)) {
    throw CycleError("formula at " + formatA1(cell) + " would create a circular reference");
  }
  removeFormula(cell);
  index(cell, regs);
  forward_[cell] = std::move(regs);
}

void DependencyGraph::assign(CellAddress cell, const Expr& expr) {
  std::vector<Region> regs = references(expr);
  removeFormula(cell);
  index(cell, regs);
  forward_[cell] = std::move(regs);
}

void DependencyGraph::removeFormula(CellAddress cell) {
  const auto it = forward_.find(cell);
  if (it == forward_.end()) return;
  unindex(cell, it->second);
  forward_.erase(it);
}

std::set<CellAddress> DependencyGraph::dependents(CellAddress cell) const {
  std::set<CellAddress> out;
  if (const auto it = cellDependents_.find(cell); it != cellDependents_.end()) {
    out.insert(it->second.begin(), it->second.end());
  }
  for (const auto& [r, d] : rangeDependents_) {
    if (r.contains(cell)) out.insert(d);
  }
  return out;
}

std::vector<CellAddress> DependencyGraph::dirtyOrder(const std::set<CellAddress>& changed) const {
  // Reverse post-order of a DFS along dependent edges is a topological order.
  std::vector<CellAddress> post;
  std::set<CellAddress> visited;
  struct Frame {
    CellAddress cell;
    std::vector<CellAddress> next;
    std::size_t i = 0;
  };
  for (const auto& root : changed) {
    if (visited.count(root)) continue;
    visited.insert(root);
    std::vector<Frame> stack;
    auto deps = dependents(root);
    stack.push_back({root, {deps.begin(), deps.end()}});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.i < f.next.size()) {
        const CellAddress n = f.next[f.i++];
        if (visited.insert(n).second) {
          auto d = dependents(n);
          stack.push_back({n, {d.begin(), d.end()}});
        }
      } else {
        post.push_back(f.cell);
        stack.pop_back();
      }
    }
  }
  std::reverse(post.begin(), post.end());
  std::erase_if(post, [&](CellAddress a) { return !hasFormula(a); });
  return post;
}

std::vector<CellAddress> DependencyGraph::topologicalOrder() const {
  std::set<CellAddress> roots;
  for (const auto& [c, p] : forward_) roots.insert(c);
  // Every formula is a root; dirtyOrder then orders precedents first.
  return dirtyOrder(roots);
}

bool DependencyGraph::consistent() const {
  std::map<CellAddress, std::set<CellAddress>> cells;
  std::vector<std::pair<Region, CellAddress>> ranges;
  for (const auto& [cell, regs] : forward_) {
    for (const auto& r : regs) {
      if (isSingleCell(r)) {
        cells[{r.top, r.left}].insert(cell);
      } else {
        ranges.emplace_back(r, cell);
      }
    }
  }
  auto actual = rangeDependents_;
  std::sort(ranges.begin(), ranges.end());
  std::sort(actual.begin(), actual.end());
  return cells == cellDependents_ && ranges == actual;
}

std::vector<std::pair<CellAddress, Value>> recompute(const DependencyGraph& graph,
                                                     const Sheet& sheet,
                                                     const std::set<CellAddress>& changed,
                                                     std::map<CellAddress, Value>& values) {
  std::vector<std::pair<CellAddress, Value>> updates;
  const CachedSheetReader reader(sheet, values);
  for (const CellAddress cell : graph.dirtyOrder(changed)) {
    const auto* f = std::get_if<Formula>(&sheet.get(cell));
    if (!f) continue;
    Value v = evaluate(*f->expr, reader);
    const auto it = values.find(cell);
    if (it == values.end() || !sameValue(it->second, v)) {
      values[cell] = v;
      updates.emplace_back(cell, std::move(v));
    }
  }
  return updates;
}

}  // namespace gridstore
