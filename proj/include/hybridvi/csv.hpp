#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hybridvi {

// Minimal CSV table: string cells plus numeric accessors. Numeric output is
// printed with %.17g so that write -> read round-trips bit-exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // -1 when absent
  double num(size_t row, int col) const;
  Eigen::VectorXd numeric_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& col_name = "value");
Eigen::VectorXd read_vector_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

}  // namespace hybridvi
