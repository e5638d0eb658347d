#include "sae/csv.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace sae {

void write_matrix_csv(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << m(i, j);
    }
    out << "\n";
  }
}

MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return MatrixXd(0, 0);
  MatrixXd m(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_vector_csv(const std::string& path, const VectorXd& v) {
  write_matrix_csv(path, v);
}

VectorXd read_vector_csv(const std::string& path) {
  MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 1) throw std::runtime_error("expected a single column: " + path);
  return m.col(0);
}

}  // namespace sae
