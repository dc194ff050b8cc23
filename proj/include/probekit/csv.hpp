#pragma once

// Minimal RFC-4180 reader/writer. Quoted fields may contain commas, quotes
// ("" escape) and line breaks. Input must be UTF-8; a leading BOM is skipped.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probekit::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// Parses the whole document. Throws DataError (with line number) on an
/// unterminated quote or stray characters after a closing quote.
std::vector<Record> parse(std::string_view text);

/// Header-addressed view: first record is the header, the rest are rows.
class Table {
 public:
  static Table parse(std::string_view text, std::string_view source = "<csv>");

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<Record>& rows() const { return rows_; }

  /// Column index for name; throws DataError naming the source if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<Record> rows_;
};

std::string escape(std::string_view field);
void write_row(std::ostream& out, std::span<const std::string> fields);

}  // namespace probekit::csv
