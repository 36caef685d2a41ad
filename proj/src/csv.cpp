#include "conquer/csv.hpp"

#include "conquer/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace conquer {

namespace {

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line)
{
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return cells;
}

bool blank(std::string_view line)
{
  return trim(line).empty();
}

} // namespace

LoadedData load_csv(std::istream& in, const std::string& y_col)
{
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line))
      break;
  }
  if (blank(line))
    throw DataError("CSV input is empty");

  const auto header = split(line);
  std::size_t y_index = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == y_col) {
      if (y_index != header.size())
        throw DataError("response column '" + y_col + "' appears twice");
      y_index = j;
    }
  }
  if (y_index == header.size())
    throw DataError("response column '" + y_col + "' not found in header");

  std::vector<std::string> names{ "(Intercept)" };
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != y_index)
      names.emplace_back(header[j]);

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line))
      continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError(line_no, cells.size(),
                       "row " + std::to_string(line_no) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(header.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v = 0.0;
      const auto cell = cells[j];
      const auto [ptr, ec] =
        std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() ||
          cell.empty() || !std::isfinite(v))
        throw ParseError(line_no, j + 1,
                         "non-numeric value '" + std::string(cell) +
                           "' at row " + std::to_string(line_no) +
                           ", column " + std::to_string(j + 1) + " (" +
                           std::string(header[j]) + ")");
      values.push_back(v);
    }
    ++rows;
  }

  const Eigen::Index n = Eigen::Index(rows);
  const Eigen::Index cols = Eigen::Index(header.size());
  Vector y(n);
  Matrix X(n, cols);
  X.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 1;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = values[std::size_t(i * cols + j)];
      if (std::size_t(j) == y_index)
        y(i) = v;
      else
        X(i, k++) = v;
    }
  }
  return { Dataset(std::move(y), std::move(X)), std::move(names) };
}

LoadedData load_csv_file(const std::string& path, const std::string& y_col)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open data file '" + path + "'");
  return load_csv(in, y_col);
}

} // namespace conquer
