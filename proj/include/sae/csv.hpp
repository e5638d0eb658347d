#pragma once

#include <iosfwd>
#include <string>

#include "sae/types.hpp"

namespace sae {

/// Plain numeric CSV, full double precision, no header.
void write_matrix_csv(const std::string& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const std::string& path);

void write_vector_csv(const std::string& path, const VectorXd& v);
VectorXd read_vector_csv(const std::string& path);

}  // namespace sae
