#include <gtest/gtest.h>
#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "gridstore/store.hpp"

using namespace gridstore;
namespace fs = std::filesystem;

namespace {

fs::path freshDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gridstore_store_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name[0] == '.') continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[name] = s.str();
  }
  return out;
}

void overwrite(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// Two sheets, every table kind, formulae, a linked and an unlinked table,
// and id orders disturbed by structural edits.
Workbook sample() {
  Workbook wb;
  Sheet s(12, 6);
  for (Index r = 1; r <= 4; ++r) {
    for (Index c = 1; c <= 3; ++c) s.set({r, c}, number(static_cast<double>(r * 10 + c) / 4));
  }
  for (Index r = 6; r <= 9; ++r) s.set({r, 5}, text("col\t" + std::to_string(r)));
  s.set({11, 1}, formula("=SUM(A1:C4)"));
  s.set({11, 2}, formula("=A11*2"));
  s.set({12, 6}, boolean(true));
  s.set({12, 4}, text("back\\slash\nline"));
  const Decomposition layout{{{{1, 1, 4, 3}, ModelKind::ROM, ""},
                              {{6, 5, 9, 5}, ModelKind::COM, ""},
                              {{11, 1, 12, 6}, ModelKind::RCV, ""}},
                             ""};
  auto& main = wb.addSheet("main", SheetEngine(s, {}, layout));
  main.insertRowAfter(2);
  main.deleteColumn(4);
  main.updateCell({14, 1}, text("item"));
  main.updateCell({14, 2}, text("qty"));
  main.updateCell({15, 1}, text("bolt"));
  main.updateCell({15, 2}, number(3));
  wb.linkTable("main", {14, 1, 15, 2}, "parts");
  wb.addSheet("empty", 3, 3);
  wb.setTable("loose", TableValue{{"k", "v"}, {{number(1), text("a")}, {Empty{}, boolean(false)}}});
  return wb;
}

}  // namespace

TEST(Store, CellCodecRoundTrip) {
  const std::vector<CellContent> cells = {
      number(0.1),   number(-0.0), number(1e300), number(std::numeric_limits<double>::denorm_min()),
      number(-7),    text(""),     text("a\tb\nc\\d"), boolean(true),
      boolean(false), formula("=SUM(A1:B2)*2"), formula("=\"x\ty\"")};
  for (const auto& c : cells) {
    const auto enc = encodeCell(c);
    EXPECT_EQ(enc.find('\t'), std::string::npos) << enc;
    EXPECT_EQ(enc.find('\n'), std::string::npos) << enc;
    const auto dec = decodeCell(enc);
    EXPECT_EQ(dec, c) << enc;
    if (const auto* d = std::get_if<double>(&c)) {
      EXPECT_EQ(std::signbit(*d), std::signbit(std::get<double>(dec)));
    }
  }
  EXPECT_EQ(encodeCell(Empty{}), "");
  EXPECT_TRUE(isEmpty(decodeCell("")));
  EXPECT_EQ(encodeCell(number(2.5)), "n:2.5");
  EXPECT_EQ(encodeCell(text("a\tb")), "s:a\\tb");
  EXPECT_THROW(decodeCell("x:1"), StoreError);
  EXPECT_THROW(decodeCell("n:abc"), StoreError);
  EXPECT_THROW(decodeCell("b:2"), StoreError);
  EXPECT_THROW(decodeCell("s:bad\\q"), StoreError);
}

TEST(Store, Crc32cCheckValue) {
  EXPECT_EQ(crc32c("123456789"), 0xE3069283U);
  EXPECT_EQ(crc32c(""), 0U);
}

TEST(Store, RoundTripDeepEqual) {
  const auto dir = freshDir("roundtrip");
  const Workbook wb = sample();
  saveWorkbook(wb, dir);
  const Workbook back = loadWorkbook(dir);
  EXPECT_EQ(workbookDifference(wb, back), "");
  EXPECT_EQ(back.sheet("main").content({12, 1}), wb.sheet("main").content({12, 1}));
  EXPECT_TRUE(sameValue(back.sheet("main").value({12, 1}), wb.sheet("main").value({12, 1})));
  EXPECT_EQ(back.table("parts").rows[0][0], text("bolt"));
  EXPECT_TRUE(back.sheet("main").checkConsistency().ok);
}

TEST(Store, DifferenceDetectsChanges) {
  const Workbook a = sample();
  Workbook b = sample();
  EXPECT_EQ(workbookDifference(a, b), "");
  b.sheet("main").updateCell({1, 1}, number(99));
  EXPECT_NE(workbookDifference(a, b), "");
  Workbook c = sample();
  c.setTable("loose", TableValue{{"k", "v"}, {}});
  EXPECT_NE(workbookDifference(a, c), "");
}

TEST(Store, DoubleSaveByteIdentical) {
  const auto d1 = freshDir("double1");
  const auto d2 = freshDir("double2");
  const Workbook wb = sample();
  saveWorkbook(wb, d1);
  const auto first = files(d1);
  saveWorkbook(wb, d1);
  EXPECT_EQ(files(d1), first);
  saveWorkbook(loadWorkbook(d1), d2);
  EXPECT_EQ(files(d2), first);
}

TEST(Store, ResaveDropsStalePayloads) {
  const auto dir = freshDir("stale");
  Workbook wb = sample();
  saveWorkbook(wb, dir);
  wb.sheet("main").updateCell({1, 1}, number(-1));
  saveWorkbook(wb, dir);
  const auto now = files(dir);
  const Workbook back = loadWorkbook(dir);
  EXPECT_EQ(workbookDifference(wb, back), "");
  // Exactly the manifest plus the files it references.
  const auto manifest = now.at("manifest.json");
  for (const auto& [name, bytes] : now) {
    if (name != "manifest.json") EXPECT_NE(manifest.find(name), std::string::npos) << name;
  }
}

TEST(Store, CorruptPayloadNamesFile) {
  const auto dir = freshDir("corrupt");
  saveWorkbook(sample(), dir);
  for (const auto& [name, bytes] : files(dir)) {
    if (name == "manifest.json") continue;
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x01;
    overwrite(dir / name, bad);
    try {
      loadWorkbook(dir);
      ADD_FAILURE() << "corruption of " << name << " not detected";
    } catch (const StoreError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
    }
    overwrite(dir / name, bytes);
  }
  EXPECT_NO_THROW(loadWorkbook(dir));
}

TEST(Store, MissingPayloadIsDangling) {
  const auto dir = freshDir("dangling");
  saveWorkbook(sample(), dir);
  for (const auto& [name, bytes] : files(dir)) {
    if (name.find(".rom.") != std::string::npos) fs::remove(dir / name);
  }
  try {
    loadWorkbook(dir);
    FAIL() << "missing payload accepted";
  } catch (const StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("dangling"), std::string::npos) << e.what();
  }
}

TEST(Store, VersionMismatch) {
  const auto dir = freshDir("version");
  saveWorkbook(Workbook{}, dir);
  auto manifest = files(dir).at("manifest.json");
  const auto at = manifest.find("\"version\": 1");
  ASSERT_NE(at, std::string::npos);
  manifest.replace(at, 12, "\"version\": 9");
  overwrite(dir / "manifest.json", manifest);
  try {
    loadWorkbook(dir);
    FAIL() << "version 9 accepted";
  } catch (const StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Store, EmptyWorkbookIsManifestOnly) {
  const auto dir = freshDir("empty");
  saveWorkbook(Workbook{}, dir);
  const auto f = files(dir);
  ASSERT_EQ(f.size(), 1U);
  EXPECT_EQ(f.begin()->first, "manifest.json");
  EXPECT_TRUE(loadWorkbook(dir).sheetNames().empty());
  EXPECT_THROW(loadWorkbook(freshDir("nothing")), StoreError);
}

TEST(Store, LockedDirectoryRejected) {
  const auto dir = freshDir("locked");
  saveWorkbook(Workbook{}, dir);
  const int fd = ::open((dir / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  EXPECT_THROW(saveWorkbook(Workbook{}, dir), StoreError);
  EXPECT_THROW(loadWorkbook(dir), StoreError);
  ::close(fd);
  EXPECT_NO_THROW(loadWorkbook(dir));
}

TEST(Store, GoldenExampleMatchesDocs) {
  // A fixed workbook must serialize exactly as the documented example.
  Workbook wb;
  Sheet s(3, 3);
  s.set({1, 1}, text("name"));
  s.set({1, 2}, text("score"));
  s.set({2, 1}, text("ada"));
  s.set({2, 2}, number(9.5));
  s.set({3, 3}, formula("=B2*2"));
  const Decomposition layout{{{{1, 1, 2, 2}, ModelKind::ROM, ""}, {{3, 3, 3, 3}, ModelKind::RCV, ""}}, ""};
  wb.addSheet("Sheet1", SheetEngine(s, {}, layout));
  const auto dir = freshDir("golden");
  saveWorkbook(wb, dir);
  const fs::path golden = fs::path(GRIDSTORE_SOURCE_DIR) / "docs" / "store-example";
  EXPECT_EQ(files(dir), files(golden));
}
