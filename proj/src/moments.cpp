#include "hmfront/moments.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace hmfront {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace

ReturnsMatrixd read_returns_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_commas(line);
  }
  if (header.empty()) throw DataError("returns CSV: missing header row");
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j].empty()) throw DataError("returns CSV: empty asset identifier in column " + std::to_string(j + 1));

  const std::size_t n = header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != n)
      throw DataError("returns CSV: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(n));
    for (std::size_t j = 0; j < n; ++j) {
      const std::string& cell = cells[j];
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last)
        throw DataError("returns CSV: line " + std::to_string(line_no) + ", column " + std::to_string(j + 1) +
                        " (" + header[j] + "): cannot parse '" + cell + "'");
      if (!std::isfinite(v))
        throw DataError("returns CSV: line " + std::to_string(line_no) + ", column " + std::to_string(j + 1) +
                        " (" + header[j] + "): non-finite value");
      values.push_back(v);
    }
    ++rows;
  }

  Eigen::MatrixXd obs(static_cast<Index>(rows), static_cast<Index>(n));
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t j = 0; j < n; ++j)
      obs(static_cast<Index>(t), static_cast<Index>(j)) = values[t * n + j];
  return ReturnsMatrixd(std::move(header), std::move(obs));
}

ReturnsMatrixd read_returns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("returns CSV: cannot open '" + path + "'");
  return read_returns_csv(in);
}

}  // namespace hmfront
