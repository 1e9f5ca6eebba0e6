#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace eitnet {

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);
std::string format_number(std::int64_t value);
std::string format_number(std::uint64_t value);
inline std::string format_number(int value) { return format_number(std::int64_t{value}); }

/// RFC 4180 quoting: fields with a comma, quote or newline are quoted.
std::string csv_escape(std::string_view field);

/// Every file starts with "# seed=<seed>[ <note>]", then the header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::uint64_t seed, std::vector<std::string> header,
            std::string_view note = {});

  void row(const std::vector<std::string>& fields);
  std::size_t columns() const { return header_.size(); }

 private:
  std::ostream& os_;
  std::vector<std::string> header_;
};

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

/// Parses "#" comment lines, a header and rows. Quoted fields may contain
/// commas and doubled quotes but not newlines.
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

}  // namespace eitnet
