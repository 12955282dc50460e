#include "gridstore/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <boost/crc.hpp>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace gridstore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kLockFile = ".lock";

std::string sysError(const std::string& what, const fs::path& p) {
  return what + " " + p.string() + ": " + std::strerror(errno);
}

// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    const fs::path p = dir / kLockFile;
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StoreError(sysError("cannot open lock file", p));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw StoreError("workbook directory " + dir.string() + " is locked by another process");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

void writeAll(int fd, std::string_view bytes, const fs::path& p) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreError(sysError("write failed for", p));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Temp file, fsync, rename.
void writeAtomic(const fs::path& dir, const std::string& name, std::string_view bytes) {
  const fs::path tmp = dir / ("." + name + ".tmp");
  const fs::path dst = dir / name;
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StoreError(sysError("cannot create", tmp));
  try {
    writeAll(fd, bytes, tmp);
    if (::fsync(fd) != 0) throw StoreError(sysError("fsync failed for", tmp));
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), dst.c_str()) != 0) throw StoreError(sysError("cannot rename onto", dst));
}

void syncDir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) throw StoreError(sysError("cannot open directory", dir));
  ::fsync(fd);
  ::close(fd);
}

std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StoreError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string hex8(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char ch : s) {
    switch (ch) {
      case '\\':
        out += "\\\\";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw StoreError("dangling escape in field");
    switch (s[i]) {
      case '\\':
        out += '\\';
        break;
      case 't':
        out += '\t';
        break;
      case 'n':
        out += '\n';
        break;
      default:
        throw StoreError(std::string("unknown escape \\") + s[i]);
    }
  }
  return out;
}

std::vector<std::string_view> splitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::vector<std::string_view> splitLines(std::string_view bytes) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < bytes.size()) {
    const auto nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) throw StoreError("payload does not end with a newline");
    out.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

ItemId parseId(std::string_view s) {
  ItemId v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty()) {
    throw StoreError("malformed identifier '" + std::string(s) + "'");
  }
  return v;
}

void appendIds(std::string& out, const std::vector<ItemId>& ids, std::size_t from, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += '\t';
    out += std::to_string(ids[from + i]);
  }
  out += '\n';
}

// ROM/TOM: header of column ids, one record per row id. COM: transposed.
std::string tablePayload(const Sheet& snap, const Region& r, bool byRow, const std::vector<ItemId>& rowIds,
                         const std::vector<ItemId>& colIds) {
  const auto& majorIds = byRow ? rowIds : colIds;
  const auto& minorIds = byRow ? colIds : rowIds;
  const Index majorLo = byRow ? r.top : r.left, majorHi = byRow ? r.bottom : r.right;
  const Index minorLo = byRow ? r.left : r.top, minorHi = byRow ? r.right : r.bottom;
  std::string out;
  appendIds(out, minorIds, static_cast<std::size_t>(minorLo - 1), static_cast<std::size_t>(minorHi - minorLo + 1));
  for (Index m = majorLo; m <= majorHi; ++m) {
    std::string line = std::to_string(majorIds[static_cast<std::size_t>(m - 1)]);
    bool any = false;
    for (Index n = minorLo; n <= minorHi; ++n) {
      const CellContent& c = snap.get(byRow ? CellAddress{m, n} : CellAddress{n, m});
      any = any || !isEmpty(c);
      line += '\t';
      line += encodeCell(c);
    }
    if (any) {
      out += line;
      out += '\n';
    }
  }
  return out;
}

std::string valuePayload(const TableValue& t) {
  std::string out;
  for (std::size_t j = 0; j < t.attributes.size(); ++j) {
    if (j) out += '\t';
    out += encodeCell(text(t.attributes[j]));
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += '\t';
      out += encodeCell(row[j]);
    }
    out += '\n';
  }
  return out;
}

struct Output {
  std::map<std::string, std::string> files;
  json checksums = json::object();

  std::string add(const std::string& prefix, const std::string& ext, std::string bytes) {
    const auto crc = crc32c(bytes);
    const std::string name = prefix + "." + hex8(crc) + "." + ext;
    checksums[name] = hex8(crc);
    files[name] = std::move(bytes);
    return name;
  }
};

std::string kindTag(ModelKind k) {
  std::string s(kindName(k));
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

std::uint32_t crc32c(std::string_view bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string encodeCell(const CellContent& c) {
  struct Visitor {
    std::string operator()(const Empty&) const { return ""; }
    std::string operator()(double d) const {
      char buf[64];
      const auto r = std::to_chars(buf, buf + sizeof buf, d);
      return "n:" + std::string(buf, r.ptr);
    }
    std::string operator()(const std::string& s) const { return "s:" + escape(s); }
    std::string operator()(bool b) const { return b ? "b:1" : "b:0"; }
    std::string operator()(const Formula& f) const { return "f:" + escape(f.source); }
  };
  return std::visit(Visitor{}, c);
}

CellContent decodeCell(std::string_view field) {
  if (field.empty()) return Empty{};
  if (field.size() < 2 || field[1] != ':') throw StoreError("malformed cell field '" + std::string(field) + "'");
  const auto body = field.substr(2);
  switch (field[0]) {
    case 'n': {
      double d = 0;
      const auto r = std::from_chars(body.data(), body.data() + body.size(), d);
      if (r.ec != std::errc{} || r.ptr != body.data() + body.size() || body.empty()) {
        throw StoreError("malformed number '" + std::string(body) + "'");
      }
      return d;
    }
    case 's':
      return unescape(body);
    case 'b':
      if (body == "0") return false;
      if (body == "1") return true;
      throw StoreError("malformed boolean '" + std::string(body) + "'");
    case 'f':
      try {
        return formula(unescape(body));
      } catch (const ParseError& e) {
        throw StoreError(std::string("malformed formula: ") + e.what());
      }
    default:
      throw StoreError("unknown cell tag '" + std::string(1, field[0]) + "'");
  }
}

void saveWorkbook(const Workbook& wb, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StoreError("cannot create " + dir.string() + ": " + ec.message());
  const DirLock lock(dir);

  Output out;
  json sheets = json::array();
  std::size_t si = 0;
  for (const auto& name : wb.sheetNames()) {
    const SheetEngine& e = wb.sheet(name);
    const Sheet snap = e.snapshot();
    const auto rowIds = e.rowIds();
    const auto colIds = e.colIds();
    const std::string base = "s" + std::to_string(si++);
    json js;
    js["name"] = name;
    js["rows"] = e.rows();
    js["cols"] = e.cols();
    js["row_ids"] = out.add(base + ".rows", "ids", encodeIds(rowIds));
    js["col_ids"] = out.add(base + ".cols", "ids", encodeIds(colIds));
    const auto d = e.decomposition();
    std::string rcvFile;
    json entries = json::array();
    for (std::size_t k = 0; k < d.entries.size(); ++k) {
      const auto& entry = d.entries[k];
      std::string file;
      if (entry.kind == ModelKind::RCV) {
        if (rcvFile.empty()) {
          std::string bytes;
          for (const auto& [a, c] : snap.cells()) {
            const bool inRcv = std::any_of(d.entries.begin(), d.entries.end(), [&](const auto& x) {
              return x.kind == ModelKind::RCV && x.region.contains(a);
            });
            if (!inRcv) continue;
            bytes += std::to_string(rowIds[static_cast<std::size_t>(a.row - 1)]) + '\t' +
                     std::to_string(colIds[static_cast<std::size_t>(a.col - 1)]) + '\t' + encodeCell(c) + '\n';
          }
          rcvFile = out.add(base + ".rcv", "tbl", std::move(bytes));
        }
        file = rcvFile;
      } else {
        file = out.add(base + ".e" + std::to_string(k) + "." + kindTag(entry.kind), "tbl",
                       tablePayload(snap, entry.region, entry.kind != ModelKind::COM, rowIds, colIds));
      }
      entries.push_back({{"top", entry.region.top},
                         {"left", entry.region.left},
                         {"bottom", entry.region.bottom},
                         {"right", entry.region.right},
                         {"kind", std::string(kindName(entry.kind))},
                         {"table", entry.table},
                         {"file", file}});
    }
    js["entries"] = std::move(entries);
    json seeds = json::array();
    for (const auto& [a, c] : snap.cells()) {
      if (isFormula(c)) seeds.push_back(formatA1(a));
    }
    js["formulas"] = std::move(seeds);
    sheets.push_back(std::move(js));
  }
  json tables = json::array();
  std::size_t ti = 0;
  for (const auto& [name, t] : wb.unlinkedTables()) {
    tables.push_back({{"name", name}, {"file", out.add("t" + std::to_string(ti++), "tbl", valuePayload(t))}});
  }
  json manifest;
  manifest["format"] = "gridstore-workbook";
  manifest["version"] = kStoreFormatVersion;
  manifest["sheets"] = std::move(sheets);
  manifest["tables"] = std::move(tables);
  manifest["checksums"] = out.checksums;

  for (const auto& [name, bytes] : out.files) writeAtomic(dir, name, bytes);
  syncDir(dir);
  writeAtomic(dir, kManifest, manifest.dump(2) + "\n");
  syncDir(dir);
  for (const auto& f : fs::directory_iterator(dir)) {
    const auto name = f.path().filename().string();
    if (name == kManifest || name == kLockFile || out.files.count(name)) continue;
    fs::remove(f.path(), ec);
  }
}

namespace {

struct Loader {
  fs::path dir;
  json checksums;
  std::map<std::string, std::string> cache;

  const std::string& payload(const std::string& name) {
    if (const auto it = cache.find(name); it != cache.end()) return it->second;
    if (!checksums.contains(name)) throw StoreError("dangling reference: " + name + " has no checksum entry");
    const fs::path p = dir / name;
    if (name.find('/') != std::string::npos || !fs::is_regular_file(p)) {
      throw StoreError("dangling reference: payload " + name + " is missing");
    }
    std::string bytes = readFile(p);
    if (hex8(crc32c(bytes)) != checksums[name].get<std::string>()) {
      throw StoreError("checksum mismatch in " + name);
    }
    return cache[name] = std::move(bytes);
  }
};

Index toIndex(const std::unordered_map<ItemId, Index>& pos, ItemId id, const std::string& file) {
  const auto it = pos.find(id);
  if (it == pos.end()) throw StoreError(file + ": identifier " + std::to_string(id) + " not in the sheet");
  return it->second;
}

}  // namespace

Workbook loadWorkbook(const fs::path& dir, EngineOptions options) {
  if (!fs::is_directory(dir)) throw StoreError("no workbook directory " + dir.string());
  const DirLock lock(dir);
  const fs::path mp = dir / kManifest;
  if (!fs::is_regular_file(mp)) throw StoreError("missing manifest " + mp.string());
  json manifest;
  try {
    manifest = json::parse(readFile(mp));
  } catch (const json::exception& e) {
    throw StoreError("malformed manifest " + mp.string() + ": " + e.what());
  }
  Workbook wb(options);
  try {
    if (manifest.value("format", "") != "gridstore-workbook") throw StoreError("not a workbook manifest");
    const int version = manifest.at("version").get<int>();
    if (version != kStoreFormatVersion) {
      throw StoreError("unsupported format version " + std::to_string(version) + " (expected " +
                       std::to_string(kStoreFormatVersion) + ")");
    }
    Loader ld{dir, manifest.at("checksums"), {}};
    for (const auto& js : manifest.at("sheets")) {
      const Index rows = js.at("rows").get<Index>();
      const Index cols = js.at("cols").get<Index>();
      std::vector<ItemId> rowIds, colIds;
      try {
        rowIds = decodeIds(ld.payload(js.at("row_ids").get<std::string>()));
        colIds = decodeIds(ld.payload(js.at("col_ids").get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw StoreError(std::string("malformed id order: ") + e.what());
      }
      const auto rowPos = [&] {
        std::unordered_map<ItemId, Index> m;
        for (std::size_t i = 0; i < rowIds.size(); ++i) m.emplace(rowIds[i], static_cast<Index>(i + 1));
        return m;
      }();
      const auto colPos = [&] {
        std::unordered_map<ItemId, Index> m;
        for (std::size_t i = 0; i < colIds.size(); ++i) m.emplace(colIds[i], static_cast<Index>(i + 1));
        return m;
      }();
      Sheet sheet(rows, cols);
      Decomposition layout;
      std::set<std::string> rcvFiles;
      for (const auto& je : js.at("entries")) {
        DecompositionEntry entry{{je.at("top").get<Index>(), je.at("left").get<Index>(), je.at("bottom").get<Index>(),
                                  je.at("right").get<Index>()},
                                 parseKind(je.at("kind").get<std::string>()),
                                 je.at("table").get<std::string>()};
        if (!entry.region.valid() || entry.region.bottom > rows || entry.region.right > cols) {
          throw StoreError("entry " + formatRange(entry.region) + " outside the sheet");
        }
        layout.entries.push_back(entry);
        const std::string file = je.at("file").get<std::string>();
        const std::string& bytes = ld.payload(file);
        if (entry.kind == ModelKind::RCV) {
          if (!rcvFiles.insert(file).second) continue;
          for (const auto line : splitLines(bytes)) {
            const auto f = splitFields(line);
            if (f.size() != 3) throw StoreError(file + ": RCV record needs 3 fields");
            sheet.set({toIndex(rowPos, parseId(f[0]), file), toIndex(colPos, parseId(f[1]), file)}, decodeCell(f[2]));
          }
          continue;
        }
        const bool byRow = entry.kind != ModelKind::COM;
        const auto lines = splitLines(bytes);
        if (lines.empty()) throw StoreError(file + ": missing header");
        const auto header = splitFields(lines[0]);
        const Index minorLo = byRow ? entry.region.left : entry.region.top;
        const Index minorCount = byRow ? entry.region.colCount() : entry.region.rowCount();
        if (static_cast<Index>(header.size()) != minorCount) throw StoreError(file + ": header width mismatch");
        for (Index j = 0; j < minorCount; ++j) {
          const Index p = toIndex(byRow ? colPos : rowPos, parseId(header[static_cast<std::size_t>(j)]), file);
          if (p != minorLo + j) throw StoreError(file + ": header does not match the id order");
        }
        for (std::size_t i = 1; i < lines.size(); ++i) {
          const auto f = splitFields(lines[i]);
          if (static_cast<Index>(f.size()) != minorCount + 1) throw StoreError(file + ": record width mismatch");
          const Index m = toIndex(byRow ? rowPos : colPos, parseId(f[0]), file);
          for (Index j = 0; j < minorCount; ++j) {
            const CellAddress a = byRow ? CellAddress{m, minorLo + j} : CellAddress{minorLo + j, m};
            if (!entry.region.contains(a)) throw StoreError(file + ": record outside its region");
            sheet.set(a, decodeCell(f[static_cast<std::size_t>(j + 1)]));
          }
        }
      }
      if (sheet.rows() != rows || sheet.cols() != cols) throw StoreError("cells outside the sheet extents");
      std::set<std::string> seeds;
      for (const auto& s : js.at("formulas")) seeds.insert(s.get<std::string>());
      std::set<std::string> found;
      for (const auto& [a, c] : sheet.cells()) {
        if (isFormula(c)) found.insert(formatA1(a));
      }
      if (seeds != found) throw StoreError("formula cells do not match the manifest");
      try {
        wb.addSheet(js.at("name").get<std::string>(),
                    SheetEngine(sheet, std::move(rowIds), std::move(colIds), layout, options));
      } catch (const std::invalid_argument& e) {
        throw StoreError(std::string("sheet ") + js.at("name").get<std::string>() + ": " + e.what());
      } catch (const CycleError& e) {
        throw StoreError(std::string("sheet ") + js.at("name").get<std::string>() + ": " + e.what());
      }
    }
    for (const auto& jt : manifest.at("tables")) {
      const std::string file = jt.at("file").get<std::string>();
      const auto lines = splitLines(ld.payload(file));
      if (lines.empty()) throw StoreError(file + ": missing attribute line");
      TableValue t;
      for (const auto f : splitFields(lines[0])) {
        const auto c = decodeCell(f);
        if (!std::holds_alternative<std::string>(c)) throw StoreError(file + ": attribute names must be text");
        t.attributes.push_back(std::get<std::string>(c));
      }
      for (std::size_t i = 1; i < lines.size(); ++i) {
        std::vector<CellContent> row;
        for (const auto f : splitFields(lines[i])) row.push_back(decodeCell(f));
        t.rows.push_back(std::move(row));
      }
      try {
        wb.setTable(jt.at("name").get<std::string>(), t);
      } catch (const std::exception& e) {
        throw StoreError(file + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw StoreError("malformed manifest " + mp.string() + ": " + e.what());
  }
  return wb;
}

std::string workbookDifference(const Workbook& a, const Workbook& b) {
  if (a.sheetNames() != b.sheetNames()) return "sheet names differ";
  for (const auto& name : a.sheetNames()) {
    const SheetEngine& x = a.sheet(name);
    const SheetEngine& y = b.sheet(name);
    const std::string at = "sheet " + name + ": ";
    if (x.rows() != y.rows() || x.cols() != y.cols()) return at + "extents differ";
    if (x.rowIds() != y.rowIds() || x.colIds() != y.colIds()) return at + "id orders differ";
    if (!(x.decomposition() == y.decomposition())) return at + "layouts differ";
    const Sheet sx = x.snapshot(), sy = y.snapshot();
    if (sx.cells() != sy.cells()) return at + "cells differ";
    for (const auto& [addr, c] : sx.cells()) {
      if (isFormula(c) && !sameValue(x.value(addr), y.value(addr))) return at + "value differs at " + formatA1(addr);
    }
  }
  if (a.tableNames() != b.tableNames()) return "table names differ";
  for (const auto& name : a.tableNames()) {
    if (a.linkedSheet(name) != b.linkedSheet(name)) return "table " + name + " linked differently";
    if (!(a.table(name) == b.table(name))) return "table " + name + " differs";
  }
  return "";
}

}  // namespace gridstore
