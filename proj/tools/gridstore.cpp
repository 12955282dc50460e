// gridstore command line: import, stats, optimize, benchmarks and the HTTP
// server.

#include <csignal>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridstore/analyzer.hpp"
#include "gridstore/api.hpp"
#include "gridstore/bench.hpp"
#include "gridstore/store.hpp"

using namespace gridstore;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json jnum(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

struct SheetSource {
  std::string sheet = "synthetic";
  SyntheticSpec spec;
};

void addSheetOptions(CLI::App* app, SheetSource& src) {
  app->add_option("--sheet", src.sheet,
                  "'synthetic', a .csv file, or a mask file ('0'/'1'/'.' grid)")
      ->capture_default_str();
  app->add_option("--seed", src.spec.seed, "generator seed")->capture_default_str();
  app->add_option("--rows", src.spec.rows, "synthetic sheet rows")->capture_default_str();
  app->add_option("--cols", src.spec.cols, "synthetic sheet columns")->capture_default_str();
  app->add_option("--tables", src.spec.tableCount, "synthetic table count")->capture_default_str();
  app->add_option("--min-table-rows", src.spec.minTableRows)->capture_default_str();
  app->add_option("--max-table-rows", src.spec.maxTableRows)->capture_default_str();
  app->add_option("--min-table-cols", src.spec.minTableCols)->capture_default_str();
  app->add_option("--max-table-cols", src.spec.maxTableCols)->capture_default_str();
  app->add_option("--formulas", src.spec.formulaCount, "synthetic formula count")->capture_default_str();
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Sheet loadSheet(const SheetSource& src) {
  if (src.sheet == "synthetic") return genSynthetic(src.spec).sheet;
  if (fs::path(src.sheet).extension() == ".csv") return importCsvFile(src.sheet);
  return importMask(readFile(src.sheet));
}

CostParams paramsByName(const std::string& name) {
  if (name == "pg") return pgParams();
  if (name == "ideal") return idealParams();
  if (name == "unit") return unitParams();
  throw UsageError("unknown params '" + name + "'");
}

double parseEta(const std::string& s) {
  if (s == "inf") return kInfiniteCost;
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || v < 0) throw UsageError("bad eta '" + s + "'");
  return v;
}

Algorithm algorithmArg(const std::string& s) {
  try {
    return parseAlgorithm(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

json entriesJson(const Decomposition& d) {
  json out = json::array();
  for (const auto& e : d.entries) {
    out.push_back({{"range", formatRange(e.region)}, {"kind", std::string(kindName(e.kind))}, {"table", e.table}});
  }
  return out;
}

ApiServer* activeServer = nullptr;

extern "C" void onSignal(int) {
  if (activeServer) activeServer->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridstore: hybrid spreadsheet storage engine"};
  app.require_subcommand(1);
  bool asJson = false;

  // import
  auto* import = app.add_subcommand("import", "import a CSV file or occupancy mask into a workbook directory");
  std::string csvPath, maskPath, outDir, sheetName = "Sheet1";
  bool headers = false;
  auto* csvOpt = import->add_option("--csv", csvPath, "CSV file (first row is data)");
  auto* maskOpt = import->add_option("--mask", maskPath, "mask file ('0'/'1'/'.' grid)");
  csvOpt->excludes(maskOpt);
  import->add_flag("--headers", headers, "keep the first CSV row as text headers");
  import->add_option("--out", outDir, "workbook directory")->required();
  import->add_option("--name", sheetName, "sheet name")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "analyzer report for every sheet of a workbook");
  std::string dir;
  stats->add_option("--dir", dir, "workbook directory")->required();
  stats->add_flag("--json", asJson, "JSON instead of CSV");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "re-optimize the layout of every sheet and save");
  std::string algorithm = "aggressive", paramsName = "pg", etaArg;
  optimize->add_option("--dir", dir, "workbook directory")->required();
  optimize->add_option("--algorithm", algorithm, "dp, weighted, greedy or aggressive")->capture_default_str();
  optimize->add_option("--params", paramsName, "pg, ideal or unit")->capture_default_str();
  optimize->add_option("--eta", etaArg, "incremental migration weight (number or 'inf')");
  optimize->add_flag("--json", asJson, "JSON output");

  // bench-storage
  auto* benchStorageCmd = app.add_subcommand(
      "bench-storage", "storage cost of ROM/COM/RCV whole-sheet layouts and the optimizers, worst = 100");
  SheetSource storageSrc;
  addSheetOptions(benchStorageCmd, storageSrc);
  benchStorageCmd->add_flag("--json", asJson, "JSON instead of CSV");

  // bench-posmap
  auto* benchPosmapCmd = app.add_subcommand(
      "bench-posmap",
      "mean fetch/insert/delete latency per positional map; linear-time maps (monotonic, direct) run at "
      "most max(10, 1e9/N) ops");
  std::vector<std::string> impls{"hierarchical", "monotonic", "direct"};
  std::vector<double> sizes{1e3, 1e4, 1e5, 1e6, 1e7};
  int ops = 1000;
  std::uint64_t posSeed = 1;
  benchPosmapCmd->add_option("--impl", impls, "hierarchical, monotonic, direct")
      ->check(CLI::IsMember({"hierarchical", "monotonic", "direct"}))
      ->delimiter(',');
  benchPosmapCmd->add_option("--n", sizes, "map sizes, e.g. 1e6")->delimiter(',');
  benchPosmapCmd->add_option("--ops", ops, "operations per measurement")->capture_default_str();
  benchPosmapCmd->add_option("--seed", posSeed)->capture_default_str();
  benchPosmapCmd->add_flag("--json", asJson, "JSON instead of CSV");

  // bench-formula
  auto* benchFormulaCmd = app.add_subcommand(
      "bench-formula", "modeled and wall-clock formula access under ROM, RCV and aggressive layouts");
  SheetSource formulaSrc;
  int repeats = 5;
  std::string formulaParams = "ideal";
  addSheetOptions(benchFormulaCmd, formulaSrc);
  benchFormulaCmd->add_option("--params", formulaParams, "cost parameters of the aggressive layout")
      ->capture_default_str();
  benchFormulaCmd->add_option("--repeats", repeats, "recalculations per layout (best is reported)")
      ->capture_default_str();
  benchFormulaCmd->add_flag("--json", asJson, "JSON instead of CSV");

  // bench-incremental
  auto* benchIncCmd = app.add_subcommand(
      "bench-incremental", "storage across update batches with incremental re-optimization per eta");
  SheetSource incSrc;
  UpdateWorkload workload;
  std::vector<std::string> etas{"0", "0.5", "2", "inf"};
  std::string incParams = "pg";
  addSheetOptions(benchIncCmd, incSrc);
  benchIncCmd->add_option("--params", incParams, "pg, ideal or unit")->capture_default_str();
  benchIncCmd->add_option("--ops", workload.opCount, "total update operations")->capture_default_str();
  benchIncCmd->add_option("--batch", workload.batchSize, "operations per batch")->capture_default_str();
  benchIncCmd->add_option("--workload-seed", workload.seed)->capture_default_str();
  benchIncCmd->add_option("--eta", etas, "eta values ('inf' keeps the layout)")->delimiter(',');
  benchIncCmd->add_flag("--json", asJson, "JSON instead of CSV");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP API over a workbook directory");
  std::string listen;
  serve->add_option("--dir", dir, "workbook directory (created on first save)")->required();
  serve->add_option("--listen", listen, "host:port (default $GRIDSTORE_LISTEN or 127.0.0.1:8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*import) {
      Sheet sheet;
      if (!csvPath.empty()) {
        sheet = importCsvFile(csvPath, headers);
      } else if (!maskPath.empty()) {
        sheet = importMask(readFile(maskPath));
      } else {
        throw UsageError("import needs --csv or --mask");
      }
      Workbook wb;
      wb.addSheet(sheetName, SheetEngine(sheet));
      saveWorkbook(wb, outDir);
      std::cout << "imported " << sheet.size() << " cells into " << outDir << "\n";
    } else if (*stats) {
      const Workbook wb = loadWorkbook(dir);
      std::vector<Sheet> snaps;
      const auto names = wb.sheetNames();
      for (const auto& n : names) snaps.push_back(wb.sheet(n).snapshot());
      std::vector<NamedSheet> named;
      for (std::size_t i = 0; i < names.size(); ++i) named.push_back({names[i], &snaps[i]});
      const auto cs = corpusStats(named);
      if (asJson) {
        json out = json::array();
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        for (const auto& st : cs.perSheet) {
          out.push_back({{"sheet", st.sheet},
                         {"filled", st.filled},
                         {"formulae", st.formulae},
                         {"density", st.density},
                         {"tables", st.tables},
                         {"tabularCoverage", opt(st.tabularCoverage)},
                         {"cellsPerFormula", opt(st.cellsPerFormula)},
                         {"regionsPerFormula", opt(st.regionsPerFormula)}});
        }
        std::cout << json{{"sheets", out}}.dump(2) << "\n";
      } else {
        writeCorpusCsv(std::cout, cs);
      }
    } else if (*optimize) {
      OptimizeRequest req;
      req.algorithm = algorithmArg(algorithm);
      req.params = paramsByName(paramsName);
      if (!etaArg.empty()) req.eta = parseEta(etaArg);
      Workbook wb = loadWorkbook(dir);
      json out = json::array();
      if (!asJson) std::cout << "sheet,algorithm,cost_before,cost,migrated,entries\n";
      for (const auto& name : wb.sheetNames()) {
        auto& e = wb.sheet(name);
        const double before = liveStorageCost(e, req.params);
        const auto res = e.optimizeLayout(req);
        if (asJson) {
          out.push_back({{"sheet", name},
                         {"algorithm", algorithm},
                         {"costBefore", before},
                         {"cost", res.cost},
                         {"migratedCells", res.migratedCells},
                         {"entries", entriesJson(res.decomposition)}});
        } else {
          std::cout << name << ',' << algorithm << ',' << num(before) << ',' << num(res.cost) << ','
                    << res.migratedCells << ',' << res.decomposition.entries.size() << "\n";
        }
      }
      saveWorkbook(wb, dir);
      if (asJson) std::cout << json{{"sheets", out}}.dump(2) << "\n";
    } else if (*benchStorageCmd) {
      const auto rows = benchStorage(loadSheet(storageSrc));
      json out = json::array();
      if (!asJson) std::cout << "layout,params,cost,normalized\n";
      for (const auto& r : rows) {
        if (asJson) {
          out.push_back({{"layout", r.layout},
                         {"params", r.params},
                         {"cost", r.cost ? json(*r.cost) : json(nullptr)},
                         {"normalized", r.normalized ? json(*r.normalized) : json(nullptr)}});
        } else {
          std::cout << r.layout << ',' << r.params << ',' << (r.cost ? num(*r.cost) : "") << ','
                    << (r.normalized ? num(*r.normalized) : "") << "\n";
        }
      }
      if (asJson) std::cout << out.dump(2) << "\n";
    } else if (*benchPosmapCmd) {
      json out = json::array();
      if (!asJson) std::cout << "impl,n,ops,fetch_us,insert_us,delete_us\n";
      for (const auto& impl : impls) {
        const auto kind = parsePosMapKind(impl);
        for (const double size : sizes) {
          if (!(size >= 1) || size > 1e9) throw UsageError("--n must be between 1 and 1e9");
          const auto n = static_cast<Index>(std::llround(size));
          int k = ops;
          if (kind != PosMapKind::Hierarchical) {
            k = std::min<Index>(ops, std::max<Index>(10, static_cast<Index>(1e9) / n));
          }
          const auto t = benchPosmap(kind, n, k, posSeed);
          if (asJson) {
            out.push_back({{"impl", t.impl},
                           {"n", t.n},
                           {"ops", t.ops},
                           {"fetchUs", t.fetchUs},
                           {"insertUs", t.insertUs},
                           {"deleteUs", t.deleteUs}});
          } else {
            std::cout << t.impl << ',' << t.n << ',' << t.ops << ',' << num(t.fetchUs) << ','
                      << num(t.insertUs) << ',' << num(t.deleteUs) << "\n";
          }
        }
      }
      if (asJson) std::cout << out.dump(2) << "\n";
    } else if (*benchFormulaCmd) {
      const auto rows = benchFormula(loadSheet(formulaSrc), repeats, paramsByName(formulaParams));
      json out = json::array();
      if (!asJson) std::cout << "layout,formulas,modeled,wall_ms\n";
      for (const auto& r : rows) {
        if (asJson) {
          out.push_back({{"layout", r.layout}, {"formulas", r.formulas}, {"modeled", r.modeled}, {"wallMs", r.wallMs}});
        } else {
          std::cout << r.layout << ',' << r.formulas << ',' << num(r.modeled) << ',' << num(r.wallMs) << "\n";
        }
      }
      if (asJson) std::cout << out.dump(2) << "\n";
    } else if (*benchIncCmd) {
      std::vector<double> etaValues;
      for (const auto& s : etas) etaValues.push_back(parseEta(s));
      const auto rows = benchIncremental(loadSheet(incSrc), workload, etaValues, paramsByName(incParams));
      json out = json::array();
      if (!asJson) std::cout << "eta,batch,cost_before,cost_after,migrated\n";
      for (const auto& r : rows) {
        if (asJson) {
          out.push_back({{"eta", jnum(r.eta)},
                         {"batch", r.batch},
                         {"costBefore", r.costBefore},
                         {"costAfter", r.costAfter},
                         {"migrated", r.migrated}});
        } else {
          std::cout << num(r.eta) << ',' << r.batch << ',' << num(r.costBefore) << ',' << num(r.costAfter) << ','
                    << r.migrated << "\n";
        }
      }
      if (asJson) std::cout << out.dump(2) << "\n";
    } else if (*serve) {
      if (listen.empty()) {
        const char* env = std::getenv("GRIDSTORE_LISTEN");
        listen = env && *env ? env : "127.0.0.1:8080";
      }
      std::pair<std::string, int> addr;
      try {
        addr = parseListen(listen);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      Workbook wb = fs::exists(fs::path(dir) / "manifest.json") ? loadWorkbook(dir) : Workbook{};
      ApiService service(std::move(wb), fs::path(dir));
      ApiServer server(service);
      const int port = server.bind(addr.first, addr.second);
      activeServer = &server;
      std::signal(SIGINT, onSignal);
      std::signal(SIGTERM, onSignal);
      std::cerr << "listening on " << addr.first << ":" << port << "\n";
      server.run();
      activeServer = nullptr;
      service.save();
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
