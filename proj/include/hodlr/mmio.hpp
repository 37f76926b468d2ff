#pragma once

// Matrix Market dense array IO ("%%MatrixMarket matrix array real general"),
// the interchange format for test fixtures and the dense-mm operator type.

#include <iosfwd>
#include <string>

#include "hodlr/common.hpp"

namespace hodlr {

void write_matrix_market(std::ostream& out, const DenseMatrix& m);
void write_matrix_market(const std::string& path, const DenseMatrix& m);

DenseMatrix read_matrix_market(std::istream& in);
DenseMatrix read_matrix_market(const std::string& path);

}  // namespace hodlr
