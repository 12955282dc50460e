#pragma once

// JSON-over-HTTP service for the web grid: windowed reads, edits,
// structural operations, linking, optimization and stats.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "gridstore/engine.hpp"

namespace gridstore {

struct ApiRequest {
  std::string method;
  std::string path;  // already percent-decoded
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Routes requests to a workbook. Mutations and reads of one sheet are
/// serialized by a per-sheet lock, so every response reflects a fully
/// applied sequence of mutations. With a store directory the workbook is
/// saved after every optimize and on save().
class ApiService {
 public:
  explicit ApiService(Workbook wb = Workbook{}, std::optional<std::filesystem::path> storeDir = std::nullopt);
  ApiResponse handle(const ApiRequest& req);
  void save();

 private:
  std::mutex& sheetLock(const std::string& name);

  Workbook wb_;
  std::optional<std::filesystem::path> storeDir_;
  std::shared_mutex workbookLock_;  // exclusive for sheet creation, linking and saving
  std::mutex locksLock_;
  std::map<std::string, std::unique_ptr<std::mutex>> sheetLocks_;
};

/// "host:port" or ":port"; throws std::invalid_argument.
std::pair<std::string, int> parseListen(const std::string& listen);

/// Blocking HTTP front end for an ApiService.
class ApiServer {
 public:
  explicit ApiServer(ApiService& service);
  ~ApiServer();
  /// Binds `host:port` (port 0 picks a free port); returns the bound port
  /// or throws std::runtime_error.
  int bind(const std::string& host, int port);
  /// Serves until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gridstore
