#include "hodlr/mmio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hodlr {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

}  // namespace

void write_matrix_market(std::ostream& out, const DenseMatrix& m) {
  require(all_finite(m), "matrix market write: non-finite entries");
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << " " << m.cols() << "\n";
  char buf[64];
  for (index_t j = 0; j < m.cols(); ++j) {
    for (index_t i = 0; i < m.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf << "\n";
    }
  }
}

void write_matrix_market(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path);
  require(out.good(), "matrix market write: cannot open " + path);
  write_matrix_market(out, m);
}

DenseMatrix read_matrix_market(std::istream& in) {
  std::string header;
  require(bool(std::getline(in, header)), "matrix market read: empty stream");
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  require(banner == "%%MatrixMarket", "matrix market read: missing banner");
  require(lower(object) == "matrix" && lower(format) == "array" &&
              lower(field) == "real" && lower(symmetry) == "general",
          "matrix market read: expected 'matrix array real general'");

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream ss(line);
  index_t rows = 0, cols = 0;
  ss >> rows >> cols;
  require(rows >= 1 && cols >= 1, "matrix market read: bad size line");

  DenseMatrix m(rows, cols);
  for (index_t j = 0; j < cols; ++j) {
    for (index_t i = 0; i < rows; ++i) {
      double v;
      require(bool(in >> v), "matrix market read: truncated data section");
      m(i, j) = v;
    }
  }
  require(all_finite(m), "matrix market read: non-finite entries");
  return m;
}

DenseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "matrix market read: cannot open " + path);
  return read_matrix_market(in);
}

}  // namespace hodlr
