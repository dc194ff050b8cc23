#include "probekit/csv.hpp"

#include <algorithm>
#include <ostream>

#include "probekit/error.hpp"

namespace probekit::csv {

std::vector<Record> parse(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<Record> records;
  Record current;
  std::string field;
  std::size_t line = 1;
  current.line = line;
  bool in_quotes = false;
  bool after_quote = false;  // just closed a quoted field
  bool record_has_content = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || after_quote) {
        throw DataError("csv line " + std::to_string(line) + ": unexpected quote inside unquoted field");
      }
      in_quotes = true;
      record_has_content = true;
    } else if (c == ',') {
      end_field();
      record_has_content = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (record_has_content || !field.empty()) end_record();
      ++line;
      current.line = line;
    } else {
      if (after_quote) {
        throw DataError("csv line " + std::to_string(line) + ": characters after closing quote");
      }
      field.push_back(c);
      record_has_content = true;
    }
  }
  if (in_quotes) throw DataError("csv line " + std::to_string(current.line) + ": unterminated quoted field");
  if (record_has_content || !field.empty()) end_record();
  return records;
}

Table Table::parse(std::string_view text, std::string_view source) {
  Table t;
  t.source_ = std::string(source);
  auto records = csv::parse(text);
  if (records.empty()) return t;
  t.header_ = std::move(records.front().fields);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].fields.size() != t.header_.size()) {
      throw DataError(t.source_ + ":" + std::to_string(records[i].line) + ": expected " +
                      std::to_string(t.header_.size()) + " fields, found " +
                      std::to_string(records[i].fields.size()));
    }
    t.rows_.push_back(std::move(records[i]));
  }
  return t;
}

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) throw DataError(source_ + ": missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header_.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace probekit::csv
