#ifndef NNDE_CSV_HPP
#define NNDE_CSV_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nnde {

/// 17 significant digits: enough for an exact double round-trip.
std::string format_double(double x);
double parse_double(const std::string& text);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void header(std::span<const std::string> names);
  void row(std::span<const double> values);
  /// Row with leading text cells followed by numeric cells.
  void row(std::span<const std::string> labels, std::span<const double> values);

 private:
  std::ostream& out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads an all-numeric CSV with one header line.
CsvTable read_csv(std::istream& in);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace nnde

#endif  // NNDE_CSV_HPP
