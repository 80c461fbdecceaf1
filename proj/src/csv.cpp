#include "hybridvi/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hybridvi {

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double CsvTable::num(size_t row, int c) const {
  if (c < 0 || row >= rows.size() || c >= static_cast<int>(rows[row].size())) {
    throw std::out_of_range("CsvTable::num: cell out of range");
  }
  return std::stod(rows[row][c]);
}

Eigen::VectorXd CsvTable::numeric_column(const std::string& name) const {
  const int c = col(name);
  if (c < 0) throw std::invalid_argument("CsvTable: missing column " + name);
  Eigen::VectorXd out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = num(i, c);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << row[i] << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& col_name) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(v.size());
  for (int i = 0; i < v.size(); ++i) rows.push_back({format_double(v[i])});
  write_csv(path, {col_name}, rows);
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const auto table = read_csv(path);
  Eigen::VectorXd out(table.rows.size());
  for (size_t i = 0; i < table.rows.size(); ++i) out[i] = table.num(i, 0);
  return out;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(m.cols());
    for (int j = 0; j < m.cols(); ++j) row.push_back(format_double(m(i, j)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  const auto table = read_csv(path);
  const size_t cols = table.header.size();
  Eigen::MatrixXd out(table.rows.size(), cols);
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (size_t j = 0; j < cols; ++j) out(i, j) = table.num(i, static_cast<int>(j));
  }
  return out;
}

}  // namespace hybridvi
