#include <nlohmann/json.hpp>

#include "gridstore/decomposer.hpp"

namespace gridstore {

std::string decompositionJson(const Decomposition& d, double cost, double elapsedMs) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : d.entries) {
    entries.push_back({{"top", e.region.top},
                       {"left", e.region.left},
                       {"bottom", e.region.bottom},
                       {"right", e.region.right},
                       {"kind", kindName(e.kind)},
                       {"table", e.table}});
  }
  nlohmann::json out{{"entries", entries}, {"algorithm", d.algorithm}, {"elapsed_ms", elapsedMs}};
  out["cost"] = cost;
  return out.dump();
}

Decomposition decompositionFromJson(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Decomposition d;
  d.algorithm = j.value("algorithm", "");
  for (const auto& e : j.at("entries")) {
    d.entries.push_back({{e.at("top").get<Index>(), e.at("left").get<Index>(), e.at("bottom").get<Index>(),
                          e.at("right").get<Index>()},
                         parseKind(e.at("kind").get<std::string>()),
                         e.value("table", "")});
  }
  return d;
}

}  // namespace gridstore
