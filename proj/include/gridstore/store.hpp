#pragma once

// File-backed workbook persistence: a JSON manifest plus per-table payload
// files in a tab-separated line format, checksummed with CRC-32C.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gridstore/engine.hpp"

namespace gridstore {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kStoreFormatVersion = 1;

/// Writes every payload under a content-derived name, then swaps the
/// manifest in atomically and removes files it no longer references.
/// Throws StoreError (with the path) on I/O failure or when locked.
void saveWorkbook(const Workbook& wb, const std::filesystem::path& dir);
/// Throws StoreError on version mismatch, checksum mismatch, dangling file
/// references or malformed payloads.
Workbook loadWorkbook(const std::filesystem::path& dir, EngineOptions options = {});

/// n:<decimal> | s:<escaped> | b:0/1 | f:<escaped source>; Empty is "".
std::string encodeCell(const CellContent& c);
/// Throws StoreError on malformed fields.
CellContent decodeCell(std::string_view field);

std::uint32_t crc32c(std::string_view bytes);

/// Deep equality used by round-trip checks: extents, cells, layouts, id
/// orders, table catalog and links. Returns an empty string when equal.
std::string workbookDifference(const Workbook& a, const Workbook& b);

}  // namespace gridstore
