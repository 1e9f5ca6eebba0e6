#include "eitnet/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace eitnet {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_number(std::int64_t value) { return std::to_string(value); }
std::string format_number(std::uint64_t value) { return std::to_string(value); }

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::ostream& os, std::uint64_t seed, std::vector<std::string> header,
                     std::string_view note)
    : os_(os), header_(std::move(header)) {
  os_ << "# seed=" << seed;
  if (!note.empty()) os_ << ' ' << note;
  os_ << '\n';
  row(header_);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != header_.size()) {
    throw std::invalid_argument("csv row has " + std::to_string(fields.size()) +
                                " fields, header has " + std::to_string(header_.size()));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os_ << ',';
    os_ << csv_escape(fields[i]);
  }
  os_ << '\n';
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("csv column not found: " + std::string(name));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted csv field");
  return fields;
}

}  // namespace

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line);
    } else if (table.header.empty()) {
      table.header = split_line(line);
    } else {
      table.rows.push_back(split_line(line));
    }
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in);
}

}  // namespace eitnet
