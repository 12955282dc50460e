#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>

#include "gridstore/api.hpp"
#include "gridstore/store.hpp"

using namespace gridstore;
using nlohmann::json;

namespace {

ApiResponse call(ApiService& api, const std::string& method, const std::string& path,
                 const json& body = nullptr, std::map<std::string, std::string> query = {},
                 std::map<std::string, std::string> headers = {}) {
  ApiRequest req;
  req.method = method;
  req.path = path;
  req.query = std::move(query);
  req.headers = std::move(headers);
  if (!body.is_null()) req.body = body.dump();
  return api.handle(req);
}

ApiResponse window(ApiService& api, const std::string& sheet, int top, int left, int rows, int cols) {
  return call(api, "GET", "/sheets/" + sheet + "/window", nullptr,
              {{"top", std::to_string(top)},
               {"left", std::to_string(left)},
               {"rows", std::to_string(rows)},
               {"cols", std::to_string(cols)}});
}

ApiResponse put(ApiService& api, const std::string& sheet, const std::string& a1, const json& content,
                std::map<std::string, std::string> headers = {}) {
  return call(api, "PUT", "/sheets/" + sheet + "/cells/" + a1, {{"content", content}}, {}, std::move(headers));
}

void addSheet(ApiService& api, int rows = 3, int cols = 3) {
  const auto r = call(api, "POST", "/sheets", {{"name", "s"}, {"rows", rows}, {"cols", cols}});
  EXPECT_EQ(r.status, 201) << r.body;
}

}  // namespace

TEST(Api, CreateAndListSheets) {
  ApiService api;
  EXPECT_EQ(call(api, "GET", "/sheets").body, json({{"sheets", json::array()}}));
  const auto created = call(api, "POST", "/sheets", {{"name", "main"}, {"rows", 5}, {"cols", 2}});
  EXPECT_EQ(created.status, 201);
  EXPECT_EQ(created.body["name"], "main");
  EXPECT_EQ(created.body["rows"], 5);
  const auto list = call(api, "GET", "/sheets");
  ASSERT_EQ(list.body["sheets"].size(), 1U);
  EXPECT_EQ(list.body["sheets"][0]["name"], "main");
  EXPECT_EQ(list.body["sheets"][0]["cols"], 2);
  EXPECT_EQ(call(api, "POST", "/sheets", {{"name", "main"}}).status, 422);
  EXPECT_EQ(call(api, "POST", "/sheets", {{"rows", 2}}).status, 400);
  EXPECT_EQ(call(api, "POST", "/sheets", {{"name", "x"}, {"rows", -1}}).status, 400);
  ApiRequest bad;
  bad.method = "POST";
  bad.path = "/sheets";
  bad.body = "{not json";
  EXPECT_EQ(api.handle(bad).status, 400);
}

TEST(Api, FormulaEvaluatedInWindow) {
  ApiService api;
  addSheet(api);
  put(api, "s", "B1", 1);
  put(api, "s", "B2", "2");
  put(api, "s", "B3", 3.5);
  const auto r = put(api, "s", "A1", "=SUM(B1:B3)");
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(r.body["changed"][0]["cell"], "A1");
  EXPECT_EQ(r.body["changed"][0]["value"], 6.5);
  const auto w = window(api, "s", 1, 1, 3, 2);
  ASSERT_EQ(w.status, 200);
  EXPECT_EQ(w.body["cells"][0][0]["value"], 6.5);
  EXPECT_EQ(w.body["cells"][0][0]["display"], "6.5");
  EXPECT_EQ(w.body["cells"][0][0]["formula"], "=SUM(B1:B3)");
  EXPECT_FALSE(w.body["cells"][0][1].contains("formula"));
  EXPECT_TRUE(w.body["cells"][2][0]["value"].is_null());

  const auto dep = put(api, "s", "B2", 10);
  bool sawA1 = false;
  for (const auto& c : dep.body["changed"]) sawA1 |= c["cell"] == "A1" && c["value"] == 14.5;
  EXPECT_TRUE(sawA1) << dep.body;
}

TEST(Api, InsertRowShiftsContent) {
  ApiService api;
  addSheet(api);
  put(api, "s", "A1", "top");
  put(api, "s", "A2", "mid");
  put(api, "s", "A3", "=A2");
  const auto r = call(api, "POST", "/sheets/s/rows", {{"after", 1}});
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(r.body["rows"], 4);
  const auto w = window(api, "s", 1, 1, 4, 1);
  EXPECT_EQ(w.body["cells"][0][0]["value"], "top");
  EXPECT_TRUE(w.body["cells"][1][0]["value"].is_null());
  EXPECT_EQ(w.body["cells"][2][0]["value"], "mid");
  EXPECT_EQ(w.body["cells"][3][0]["formula"], "=A3");
  EXPECT_EQ(w.body["cells"][3][0]["value"], "mid");
}

TEST(Api, DeleteAndColumns) {
  ApiService api;
  addSheet(api);
  put(api, "s", "A1", 1);
  put(api, "s", "B1", 2);
  put(api, "s", "C1", "=A1+B1");
  EXPECT_EQ(call(api, "POST", "/sheets/s/columns", {{"after", 0}}).status, 200);
  auto w = window(api, "s", 1, 1, 1, 4);
  EXPECT_EQ(w.body["extents"]["cols"], 4);
  EXPECT_EQ(w.body["cells"][0][3]["formula"], "=B1+C1");
  EXPECT_EQ(call(api, "DELETE", "/sheets/s/columns/1").status, 200);
  EXPECT_EQ(call(api, "DELETE", "/sheets/s/rows/3").status, 200);
  w = window(api, "s", 1, 1, 5, 5);
  EXPECT_EQ(w.body["rows"], 2);
  EXPECT_EQ(w.body["cols"], 3);
  EXPECT_EQ(w.body["cells"][0][2]["value"], 3);
  EXPECT_EQ(call(api, "DELETE", "/sheets/s/rows/9").status, 422);
  EXPECT_EQ(call(api, "DELETE", "/sheets/s/rows/x").status, 400);
  EXPECT_EQ(call(api, "POST", "/sheets/s/rows", {{"after", "one"}}).status, 400);
}

TEST(Api, WindowClipped) {
  ApiService api;
  addSheet(api);
  put(api, "s", "C3", 9);
  auto w = window(api, "s", 2, 2, 50, 20);
  ASSERT_EQ(w.status, 200);
  EXPECT_EQ(w.body["rows"], 2);
  EXPECT_EQ(w.body["cols"], 2);
  EXPECT_EQ(w.body["cells"].size(), 2U);
  EXPECT_EQ(w.body["cells"][1][1]["value"], 9);
  w = window(api, "s", 100, 1, 10, 10);
  EXPECT_EQ(w.status, 200);
  EXPECT_EQ(w.body["rows"], 0);
  EXPECT_TRUE(w.body["cells"].empty());
  EXPECT_EQ(window(api, "s", 0, 1, 1, 1).status, 400);
  EXPECT_EQ(call(api, "GET", "/sheets/s/window", nullptr, {{"top", "1"}}).status, 400);
}

TEST(Api, ErrorStatuses) {
  ApiService api;
  addSheet(api);
  EXPECT_EQ(window(api, "nope", 1, 1, 1, 1).status, 404);
  EXPECT_EQ(put(api, "nope", "A1", 1).status, 404);
  EXPECT_EQ(put(api, "s", "1A", 1).status, 400);
  EXPECT_EQ(put(api, "s", "A1", "=SUM(").status, 400);
  EXPECT_EQ(call(api, "PUT", "/sheets/s/cells/A1", {{"value", 1}}).status, 400);
  EXPECT_EQ(call(api, "GET", "/nowhere").status, 404);
  EXPECT_EQ(call(api, "PATCH", "/sheets").status, 405);

  put(api, "s", "A1", 5);
  put(api, "s", "A2", "=A1");
  const auto cyc = put(api, "s", "A1", "=A2");
  EXPECT_EQ(cyc.status, 422);
  EXPECT_NE(cyc.body["error"].get<std::string>().find("circular"), std::string::npos) << cyc.body;
  const auto w = window(api, "s", 1, 1, 2, 1);
  EXPECT_EQ(w.body["cells"][0][0]["value"], 5);
}

TEST(Api, RevisionsAndIfMatch) {
  ApiService api;
  addSheet(api);
  const auto r0 = window(api, "s", 1, 1, 1, 1).body["revision"].get<std::uint64_t>();
  const auto r1 = put(api, "s", "A1", 1).body["revision"].get<std::uint64_t>();
  EXPECT_GT(r1, r0);
  const auto stale = put(api, "s", "A1", 2, {{"if-match", std::to_string(r0)}});
  EXPECT_EQ(stale.status, 409);
  EXPECT_EQ(stale.body["revision"], r1);
  EXPECT_EQ(window(api, "s", 1, 1, 1, 1).body["cells"][0][0]["value"], 1);
  const auto ok = put(api, "s", "A1", 2, {{"if-match", "\"" + std::to_string(r1) + "\""}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_GT(ok.body["revision"].get<std::uint64_t>(), r1);
  EXPECT_EQ(put(api, "s", "A1", 2, {{"if-match", "abc"}}).status, 400);
  const auto r2 = ok.body["revision"].get<std::uint64_t>();
  EXPECT_GT(call(api, "POST", "/sheets/s/rows", {{"after", 0}}).body["revision"].get<std::uint64_t>(), r2);
}

TEST(Api, LinkOptimizeAndOverlay) {
  ApiService api;
  addSheet(api, 10, 4);
  put(api, "s", "A1", "item");
  put(api, "s", "B1", "qty");
  put(api, "s", "A2", "bolt");
  put(api, "s", "B2", 4);
  const auto link = call(api, "POST", "/sheets/s/link", {{"range", "A1:B2"}, {"table", "parts"}});
  ASSERT_EQ(link.status, 200) << link.body;
  EXPECT_EQ(link.body["table"], "parts");
  EXPECT_EQ(call(api, "POST", "/sheets/s/link", {{"range", "B2:C3"}, {"table", "other"}}).status, 422);
  EXPECT_EQ(call(api, "POST", "/sheets/s/link", {{"range", "B2:"}, {"table", "other"}}).status, 400);

  for (int r = 4; r <= 10; ++r) {
    for (const char* c : {"A", "B", "C", "D"}) put(api, "s", std::string(c) + std::to_string(r), r);
  }
  const auto opt = call(api, "POST", "/sheets/s/optimize", {{"algorithm", "aggressive"}});
  ASSERT_EQ(opt.status, 200) << opt.body;
  EXPECT_LE(opt.body["cost"].get<double>(), opt.body["costBefore"].get<double>());
  const auto w = window(api, "s", 1, 1, 10, 4);
  std::vector<json> fromOverlay, fromOptimize;
  for (const auto& e : w.body["overlay"]) fromOverlay.push_back({e["range"], e["kind"]});
  for (const auto& e : opt.body["entries"]) fromOptimize.push_back({e["range"], e["kind"]});
  std::sort(fromOverlay.begin(), fromOverlay.end());
  std::sort(fromOptimize.begin(), fromOptimize.end());
  EXPECT_EQ(fromOverlay, fromOptimize);
  bool tom = false;
  for (const auto& e : w.body["overlay"]) tom |= e["kind"] == "TOM" && e["table"] == "parts";
  EXPECT_TRUE(tom);

  const auto keep = call(api, "POST", "/sheets/s/optimize", {{"algorithm", "aggressive"}, {"eta", "inf"}});
  ASSERT_EQ(keep.status, 200) << keep.body;
  EXPECT_EQ(keep.body["migratedCells"], 0);
  EXPECT_EQ(call(api, "POST", "/sheets/s/optimize", {{"algorithm", "magic"}}).status, 400);
  EXPECT_EQ(call(api, "POST", "/sheets/s/optimize", {{"algorithm", "greedy"}, {"params", "nope"}}).status, 400);
  EXPECT_EQ(call(api, "POST", "/sheets/s/optimize", {{"algorithm", "greedy"}, {"eta", -1}}).status, 400);
}

TEST(Api, OverlayClippedToWindow) {
  ApiService api;
  addSheet(api, 10, 10);
  for (int r = 1; r <= 8; ++r) {
    for (const char* c : {"A", "B", "C"}) put(api, "s", std::string(c) + std::to_string(r), r);
  }
  call(api, "POST", "/sheets/s/optimize", {{"algorithm", "dp"}});
  const auto w = window(api, "s", 3, 2, 2, 5);
  ASSERT_FALSE(w.body["overlay"].empty());
  for (const auto& e : w.body["overlay"]) {
    EXPECT_GE(e["top"].get<int>(), 3);
    EXPECT_LE(e["bottom"].get<int>(), 4);
    EXPECT_GE(e["left"].get<int>(), 2);
    EXPECT_LE(e["right"].get<int>(), 6);
  }
}

TEST(Api, Stats) {
  ApiService api;
  addSheet(api, 10, 3);
  for (int r = 1; r <= 6; ++r) {
    put(api, "s", "A" + std::to_string(r), r);
    put(api, "s", "B" + std::to_string(r), r * 2);
  }
  put(api, "s", "C1", "=SUM(A1:B6)");
  const auto st = call(api, "GET", "/sheets/s/stats");
  ASSERT_EQ(st.status, 200);
  EXPECT_EQ(st.body["filled"], 13);
  EXPECT_EQ(st.body["formulae"], 1);
  EXPECT_EQ(st.body["tables"], 1);
  EXPECT_EQ(call(api, "GET", "/sheets/x/stats").status, 404);
}

TEST(Api, ScriptEqualsDirectEngine) {
  ApiService api;
  addSheet(api, 12, 6);
  SheetEngine direct(12, 6);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 400; ++i) {
    const int kind = static_cast<int>(rng() % 10);
    const Index rows = direct.rows(), cols = direct.cols();
    if (kind < 7) {
      const CellAddress a{static_cast<Index>(rng() % rows) + 1, static_cast<Index>(rng() % cols) + 1};
      std::string input = std::to_string(rng() % 50);
      if (kind == 6) {
        input = "=SUM(" + formatRange({1, 1, static_cast<Index>(rng() % rows) + 1, 2}) + ")";
      }
      const auto r = put(api, "s", formatA1(a), input);
      try {
        direct.updateCell(a, parseCellInput(input));
        EXPECT_EQ(r.status, 200) << r.body;
      } catch (const CycleError&) {
        EXPECT_EQ(r.status, 422);
      }
    } else if (kind == 7) {
      const Index at = static_cast<Index>(rng() % (rows + 1));
      call(api, "POST", "/sheets/s/rows", {{"after", at}});
      direct.insertRowAfter(at);
    } else if (kind == 8 && cols > 2) {
      const Index at = static_cast<Index>(rng() % cols) + 1;
      call(api, "DELETE", "/sheets/s/columns/" + std::to_string(at));
      direct.deleteColumn(at);
    } else if (rows > 2) {
      const Index at = static_cast<Index>(rng() % rows) + 1;
      call(api, "DELETE", "/sheets/s/rows/" + std::to_string(at));
      direct.deleteRow(at);
    }
  }
  const auto w = window(api, "s", 1, 1, static_cast<int>(direct.rows()), static_cast<int>(direct.cols()));
  ASSERT_EQ(w.body["rows"], direct.rows());
  ASSERT_EQ(w.body["cols"], direct.cols());
  for (Index r = 1; r <= direct.rows(); ++r) {
    for (Index c = 1; c <= direct.cols(); ++c) {
      const auto& cell = w.body["cells"][r - 1][c - 1];
      EXPECT_EQ(cell["display"], displayString(direct.value({r, c}))) << formatA1({r, c});
    }
  }
  EXPECT_EQ(w.body["revision"], direct.revision());
}

TEST(Api, ConcurrentMutationsSerialized) {
  ApiService api;
  addSheet(api, 40, 4);
  const auto before = window(api, "s", 1, 1, 1, 1).body["revision"].get<std::uint64_t>();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int r = 1; r <= 40; ++r) {
        put(api, "s", formatA1({r, t + 1}), r * (t + 1));
        window(api, "s", 1, 1, 40, 4);
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto w = window(api, "s", 1, 1, 40, 4);
  EXPECT_EQ(w.body["revision"].get<std::uint64_t>(), before + 160);
  for (int r = 1; r <= 40; ++r) {
    for (int c = 1; c <= 4; ++c) EXPECT_EQ(w.body["cells"][r - 1][c - 1]["value"], r * c);
  }
}

TEST(Api, OptimizeSavesStore) {
  const auto dir = std::filesystem::temp_directory_path() / "gridstore_api_store";
  std::filesystem::remove_all(dir);
  {
    ApiService api(Workbook{}, dir);
    call(api, "POST", "/sheets", {{"name", "s"}, {"rows", 4}, {"cols", 4}});
    put(api, "s", "B2", 7);
    EXPECT_FALSE(std::filesystem::exists(dir / "manifest.json"));
    EXPECT_EQ(call(api, "POST", "/sheets/s/optimize", {{"algorithm", "greedy"}}).status, 200);
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  }
  const Workbook back = loadWorkbook(dir);
  EXPECT_EQ(back.sheet("s").content({2, 2}), number(7));
}

TEST(Api, GoldenExamples) {
  std::ifstream in(std::string(GRIDSTORE_SOURCE_DIR) + "/docs/api-examples.json");
  ASSERT_TRUE(in);
  const json examples = json::parse(in);
  ApiService api;
  ASSERT_FALSE(examples.empty());
  for (const auto& ex : examples) {
    ApiRequest req;
    req.method = ex["request"]["method"];
    req.path = ex["request"]["path"];
    if (ex["request"].contains("query")) {
      for (const auto& [k, v] : ex["request"]["query"].items()) req.query[k] = v.get<std::string>();
    }
    if (ex["request"].contains("headers")) {
      for (const auto& [k, v] : ex["request"]["headers"].items()) req.headers[k] = v.get<std::string>();
    }
    if (ex["request"].contains("body")) req.body = ex["request"]["body"].dump();
    const auto res = api.handle(req);
    EXPECT_EQ(res.status, ex["response"]["status"].get<int>()) << req.method << " " << req.path;
    EXPECT_EQ(res.body, ex["response"]["body"]) << req.method << " " << req.path;
  }
}

TEST(Api, HttpRoundTrip) {
  ApiService api;
  ApiServer server(api);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread th([&] { server.run(); });
  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sheets", R"({"name":"web sheet","rows":3,"cols":3})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  auto edited = client.Put("/sheets/web%20sheet/cells/A1", R"({"content":"=1+2"})", "application/json");
  ASSERT_TRUE(edited);
  EXPECT_EQ(edited->status, 200) << edited->body;
  auto got = client.Get("/sheets/web%20sheet/window?top=1&left=1&rows=1&cols=1");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(got->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(json::parse(got->body)["cells"][0][0]["value"], 3);
  httplib::Headers stale{{"If-Match", "0"}};
  auto conflict = client.Put("/sheets/web%20sheet/cells/A1", stale, R"({"content":1})", "application/json");
  ASSERT_TRUE(conflict);
  EXPECT_EQ(conflict->status, 409);
  server.stop();
  th.join();
}

TEST(Api, ParseListen) {
  EXPECT_EQ(parseListen("127.0.0.1:8080"), std::make_pair(std::string("127.0.0.1"), 8080));
  EXPECT_EQ(parseListen(":9000"), std::make_pair(std::string("0.0.0.0"), 9000));
  EXPECT_THROW(parseListen("host"), std::invalid_argument);
  EXPECT_THROW(parseListen("host:99999"), std::invalid_argument);
}
