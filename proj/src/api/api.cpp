#include "gridstore/api.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include "gridstore/analyzer.hpp"
#include "gridstore/store.hpp"

namespace gridstore {

using nlohmann::json;

namespace {

constexpr Index kMaxWindowRows = 10000;
constexpr Index kMaxWindowCols = 1024;

struct HttpError {
  int status;
  std::string message;
};

struct RevisionConflict {
  std::uint64_t current;
};

[[noreturn]] void fail(int status, std::string message) { throw HttpError{status, std::move(message)}; }

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    const auto j = path.find('/', i);
    out.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

Index toIndex(const std::string& s, const std::string& what) {
  Index v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) fail(400, what + " must be an integer");
  return v;
}

Index intField(const json& body, const char* key) {
  if (!body.contains(key)) fail(400, std::string("missing field '") + key + "'");
  const auto& v = body[key];
  if (!v.is_number_integer()) fail(400, std::string("field '") + key + "' must be an integer");
  return v.get<Index>();
}

std::string stringField(const json& body, const char* key) {
  if (!body.contains(key)) fail(400, std::string("missing field '") + key + "'");
  const auto& v = body[key];
  if (!v.is_string()) fail(400, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json parseBody(const ApiRequest& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) fail(400, "body must be a JSON object");
  return body;
}

json jsonNumber(double d) {
  if (std::trunc(d) == d && std::abs(d) < 9007199254740992.0) return json(static_cast<std::int64_t>(d));
  return json(d);
}

json valueJson(const Value& v) {
  struct Visitor {
    json operator()(const Empty&) const { return nullptr; }
    json operator()(double d) const { return jsonNumber(d); }
    json operator()(const std::string& s) const { return s; }
    json operator()(bool b) const { return b; }
    json operator()(const FormulaError& e) const { return {{"error", std::string(errorText(e.code))}}; }
  };
  return std::visit(Visitor{}, v);
}

json optionalJson(const std::optional<double>& v) { return v ? jsonNumber(*v) : json(nullptr); }

json regionJson(const Region& r) {
  return {{"range", formatRange(r)}, {"top", r.top}, {"left", r.left}, {"bottom", r.bottom}, {"right", r.right}};
}

json entryJson(const DecompositionEntry& e, const Region& shown) {
  json j = regionJson(shown);
  j["kind"] = std::string(kindName(e.kind));
  j["table"] = e.table;
  return j;
}

CellContent contentFromJson(const json& c) {
  if (c.is_null()) return Empty{};
  if (c.is_boolean()) return boolean(c.get<bool>());
  if (c.is_number()) return gridstore::number(c.get<double>());
  if (c.is_string()) return parseCellInput(c.get<std::string>());
  fail(400, "content must be a string, number, boolean or null");
}

CostParams paramsByName(const std::string& name) {
  if (name == "pg") return pgParams();
  if (name == "ideal") return idealParams();
  if (name == "unit") return unitParams();
  fail(400, "unknown params '" + name + "'");
}

void checkIfMatch(const ApiRequest& req, const SheetEngine& e) {
  const auto it = req.headers.find("if-match");
  if (it == req.headers.end()) return;
  std::string tag = it->second;
  if (tag.rfind("W/", 0) == 0) tag = tag.substr(2);
  if (tag.size() >= 2 && tag.front() == '"' && tag.back() == '"') tag = tag.substr(1, tag.size() - 2);
  std::uint64_t want = 0;
  const auto [end, ec] = std::from_chars(tag.data(), tag.data() + tag.size(), want);
  if (ec != std::errc() || end != tag.data() + tag.size()) fail(400, "If-Match must be a revision number");
  if (want != e.revision()) throw RevisionConflict{e.revision()};
}

json structuralResponse(const SheetEngine& e) {
  return {{"revision", e.revision()}, {"rows", e.rows()}, {"cols", e.cols()}};
}

}  // namespace

ApiService::ApiService(Workbook wb, std::optional<std::filesystem::path> storeDir)
    : wb_(std::move(wb)), storeDir_(std::move(storeDir)) {}

std::mutex& ApiService::sheetLock(const std::string& name) {
  std::lock_guard g(locksLock_);
  auto& m = sheetLocks_[name];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void ApiService::save() {
  if (!storeDir_) return;
  std::unique_lock g(workbookLock_);
  saveWorkbook(wb_, *storeDir_);
}

ApiResponse ApiService::handle(const ApiRequest& req) {
  const auto seg = segments(req.path);
  const auto& m = req.method;
  try {
    if (seg.empty() || seg[0] != "sheets") fail(404, "no route for " + req.path);

    if (seg.size() == 1) {
      if (m == "GET") {
        std::shared_lock g(workbookLock_);
        json list = json::array();
        for (const auto& name : wb_.sheetNames()) {
          std::lock_guard s(sheetLock(name));
          const auto& e = wb_.sheet(name);
          list.push_back({{"name", name}, {"rows", e.rows()}, {"cols", e.cols()}, {"revision", e.revision()}});
        }
        return {200, {{"sheets", list}}};
      }
      if (m == "POST") {
        const json body = parseBody(req);
        const auto name = stringField(body, "name");
        const Index rows = body.contains("rows") ? intField(body, "rows") : 100;
        const Index cols = body.contains("cols") ? intField(body, "cols") : 26;
        const SheetLimits limits;
        if (name.empty()) fail(400, "sheet name is empty");
        if (rows < 0 || cols < 0 || rows > limits.maxRows || cols > limits.maxCols) {
          fail(400, "sheet extents out of range");
        }
        std::unique_lock g(workbookLock_);
        if (wb_.hasSheet(name)) fail(422, "sheet '" + name + "' already exists");
        const auto& e = wb_.addSheet(name, rows, cols);
        return {201, {{"name", name}, {"rows", e.rows()}, {"cols", e.cols()}, {"revision", e.revision()}}};
      }
      fail(405, "method not allowed");
    }

    const std::string& name = seg[1];
    const std::string op = seg.size() > 2 ? seg[2] : "";
    const bool exclusive = op == "link" || op == "optimize";
    std::shared_lock shared(workbookLock_, std::defer_lock);
    std::unique_lock unique(workbookLock_, std::defer_lock);
    if (exclusive) {
      unique.lock();
    } else {
      shared.lock();
    }
    if (!wb_.hasSheet(name)) fail(404, "unknown sheet '" + name + "'");
    std::lock_guard sheetGuard(sheetLock(name));
    SheetEngine& e = wb_.sheet(name);

    if (seg.size() == 3 && op == "window") {
      if (m != "GET") fail(405, "method not allowed");
      auto q = [&](const char* key) {
        const auto it = req.query.find(key);
        if (it == req.query.end()) fail(400, std::string("missing query parameter '") + key + "'");
        return toIndex(it->second, key);
      };
      const Index top = q("top"), left = q("left"), rows = q("rows"), cols = q("cols");
      if (top < 1 || left < 1 || rows < 0 || cols < 0) fail(400, "window must start at row and column 1 or later");
      if (rows > kMaxWindowRows || cols > kMaxWindowCols) fail(400, "window too large");
      const Index shownRows = std::max<Index>(0, std::min(rows, e.rows() - top + 1));
      const Index shownCols = std::max<Index>(0, std::min(cols, e.cols() - left + 1));
      json cells = json::array();
      json overlay = json::array();
      if (shownRows > 0 && shownCols > 0) {
        const Region r{top, left, top + shownRows - 1, left + shownCols - 1};
        const auto values = e.getValues(r);
        const auto contents = e.getCells(r);
        for (std::size_t i = 0; i < values.size(); ++i) {
          json row = json::array();
          for (std::size_t j = 0; j < values[i].size(); ++j) {
            json cell = {{"value", valueJson(values[i][j])}, {"display", displayString(values[i][j])}};
            if (const auto* f = std::get_if<Formula>(&contents[i][j])) cell["formula"] = f->source;
            row.push_back(std::move(cell));
          }
          cells.push_back(std::move(row));
        }
        for (const auto& entry : e.decomposition().entries) {
          if (const auto x = entry.region.intersection(r)) overlay.push_back(entryJson(entry, *x));
        }
      }
      return {200,
              {{"top", top},
               {"left", left},
               {"rows", shownRows},
               {"cols", shownCols},
               {"extents", {{"rows", e.rows()}, {"cols", e.cols()}}},
               {"revision", e.revision()},
               {"cells", std::move(cells)},
               {"overlay", std::move(overlay)}}};
    }

    if (seg.size() == 3 && op == "stats") {
      if (m != "GET") fail(405, "method not allowed");
      const auto st = sheetStats(name, e.snapshot());
      return {200,
              {{"sheet", st.sheet},
               {"filled", st.filled},
               {"formulae", st.formulae},
               {"density", jsonNumber(st.density)},
               {"tables", st.tables},
               {"tabularCoverage", optionalJson(st.tabularCoverage)},
               {"cellsPerFormula", optionalJson(st.cellsPerFormula)},
               {"regionsPerFormula", optionalJson(st.regionsPerFormula)},
               {"revision", e.revision()}}};
    }

    if (seg.size() == 4 && op == "cells") {
      if (m != "PUT") fail(405, "method not allowed");
      CellAddress a;
      try {
        a = parseA1(seg[3]);
      } catch (const ParseError& err) {
        fail(400, "bad cell reference '" + seg[3] + "': " + err.what());
      }
      const json body = parseBody(req);
      if (!body.contains("content")) fail(400, "missing field 'content'");
      const CellContent c = contentFromJson(body["content"]);
      checkIfMatch(req, e);
      json changed = json::array();
      for (const auto& ch : e.updateCell(a, c)) {
        changed.push_back({{"cell", formatA1(ch.addr)}, {"value", valueJson(ch.value)}, {"display", displayString(ch.value)}});
      }
      return {200, {{"changed", std::move(changed)}, {"revision", e.revision()}}};
    }

    if ((op == "rows" || op == "columns") && (seg.size() == 3 || seg.size() == 4)) {
      const bool rows = op == "rows";
      if (seg.size() == 3) {
        if (m != "POST") fail(405, "method not allowed");
        const Index after = intField(parseBody(req), "after");
        checkIfMatch(req, e);
        if (rows) {
          e.insertRowAfter(after);
        } else {
          e.insertColumnAfter(after);
        }
      } else {
        if (m != "DELETE") fail(405, "method not allowed");
        const Index at = toIndex(seg[3], rows ? "row" : "column");
        checkIfMatch(req, e);
        if (rows) {
          e.deleteRow(at);
        } else {
          e.deleteColumn(at);
        }
      }
      return {200, structuralResponse(e)};
    }

    if (seg.size() == 3 && op == "link") {
      if (m != "POST") fail(405, "method not allowed");
      const json body = parseBody(req);
      const auto table = stringField(body, "table");
      Region r;
      try {
        r = parseRange(stringField(body, "range"));
      } catch (const ParseError& err) {
        fail(400, std::string("bad range: ") + err.what());
      }
      checkIfMatch(req, e);
      wb_.linkTable(name, r, table);
      return {200, {{"table", table}, {"region", regionJson(*e.linkedRegion(table))}, {"revision", e.revision()}}};
    }

    if (seg.size() == 3 && op == "optimize") {
      if (m != "POST") fail(405, "method not allowed");
      const json body = parseBody(req);
      OptimizeRequest o;
      o.algorithm = parseAlgorithm(body.contains("algorithm") ? stringField(body, "algorithm") : "aggressive");
      const std::string paramsName = body.contains("params") ? stringField(body, "params") : "pg";
      o.params = paramsByName(paramsName);
      if (body.contains("eta")) {
        const auto& eta = body["eta"];
        if (eta.is_string() && eta.get<std::string>() == "inf") {
          o.eta = kInfiniteCost;
        } else if (eta.is_number() && eta.get<double>() >= 0) {
          o.eta = eta.get<double>();
        } else {
          fail(400, "eta must be a non-negative number or \"inf\"");
        }
      }
      if (body.contains("maxTableCols")) o.maxTableCols = intField(body, "maxTableCols");
      checkIfMatch(req, e);
      const double before = hybridCost(e.decomposition(), e.snapshot(), o.params);
      const auto res = e.optimizeLayout(o);
      json entries = json::array();
      for (const auto& entry : res.decomposition.entries) entries.push_back(entryJson(entry, entry.region));
      if (storeDir_) saveWorkbook(wb_, *storeDir_);
      return {200,
              {{"algorithm", std::string(algorithmName(o.algorithm))},
               {"params", paramsName},
               {"costBefore", jsonNumber(before)},
               {"cost", jsonNumber(res.cost)},
               {"migratedCells", res.migratedCells},
               {"entries", std::move(entries)},
               {"revision", e.revision()}}};
    }

    fail(404, "no route for " + req.path);
  } catch (const HttpError& err) {
    return {err.status, {{"error", err.message}}};
  } catch (const RevisionConflict& err) {
    return {409, {{"error", "revision conflict"}, {"revision", err.current}}};
  } catch (const ParseError& err) {
    return {400, {{"error", err.what()}}};
  } catch (const json::exception& err) {
    return {400, {{"error", err.what()}}};
  } catch (const CycleError& err) {
    return {422, {{"error", err.what()}}};
  } catch (const ConstraintError& err) {
    return {422, {{"error", err.what()}}};
  } catch (const RelationalError& err) {
    return {422, {{"error", err.what()}}};
  } catch (const BudgetExceeded& err) {
    return {422, {{"error", err.what()}}};
  } catch (const OutOfRange& err) {
    return {422, {{"error", err.what()}}};
  } catch (const std::invalid_argument& err) {
    return {400, {{"error", err.what()}}};
  } catch (const std::exception& err) {
    return {500, {{"error", err.what()}}};
  }
}

std::pair<std::string, int> parseListen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("listen address must be host:port");
  std::string host = listen.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  const std::string p = listen.substr(colon + 1);
  int port = -1;
  const auto [end, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc() || end != p.data() + p.size() || port < 0 || port > 65535) {
    throw std::invalid_argument("bad port in listen address '" + listen + "'");
  }
  return {host, port};
}

}  // namespace gridstore
