#include "hodlr/hodlr_matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hodlr/dense_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hodlr {

static_assert(std::endian::native == std::endian::little,
              "HODLR container payload is little-endian");

using json = nlohmann::json;

HodlrMatrix::HodlrMatrix(HierPartition partition) : partition_(std::move(partition)) {
  factors_.resize(std::size_t(partition_.depth()));
  for (int l = 1; l <= partition_.depth(); ++l) {
    auto& level = factors_[std::size_t(l) - 1];
    level.resize(std::size_t(partition_.num_pairs(l)));
    for (index_t j = 0; j < partition_.num_pairs(l); ++j) {
      const IndexRange left = partition_.block(l, 2 * j);
      const IndexRange right = partition_.block(l, 2 * j + 1);
      level[std::size_t(j)] =
          LowRankFactor{DenseMatrix(left.size(), 0), Vector(0), DenseMatrix(right.size(), 0)};
    }
  }
  leaves_.resize(std::size_t(partition_.num_leaves()));
  for (index_t j = 0; j < partition_.num_leaves(); ++j)
    leaves_[std::size_t(j)] = DenseMatrix::Zero(partition_.leaf(j).size(), partition_.leaf(j).size());
}

HodlrMatrix HodlrMatrix::identity(HierPartition partition) {
  HodlrMatrix h(std::move(partition));
  for (index_t j = 0; j < h.partition_.num_leaves(); ++j) {
    const index_t n = h.partition_.leaf(j).size();
    h.leaves_[std::size_t(j)] = DenseMatrix::Identity(n, n);
  }
  return h;
}

const LowRankFactor& HodlrMatrix::factor(int level, index_t pair) const {
  require(level >= 1 && level <= depth(), "HodlrMatrix::factor: level out of range");
  require(pair >= 0 && pair < partition_.num_pairs(level), "HodlrMatrix::factor: pair out of range");
  return factors_[std::size_t(level) - 1][std::size_t(pair)];
}

void HodlrMatrix::set_factor(int level, index_t pair, LowRankFactor f) {
  require(level >= 1 && level <= depth(), "HodlrMatrix::set_factor: level out of range");
  require(pair >= 0 && pair < partition_.num_pairs(level),
          "HodlrMatrix::set_factor: pair out of range");
  const IndexRange left = partition_.block(level, 2 * pair);
  const IndexRange right = partition_.block(level, 2 * pair + 1);
  require(f.u.rows() == left.size() && f.v.rows() == right.size(),
          "HodlrMatrix::set_factor: block shape mismatch");
  require(f.u.cols() == f.sigma.size() && f.v.cols() == f.sigma.size(),
          "HodlrMatrix::set_factor: rank mismatch");
  require(all_finite(f.u) && all_finite(f.v) && f.sigma.allFinite(),
          "HodlrMatrix::set_factor: non-finite factor");
  factors_[std::size_t(level) - 1][std::size_t(pair)] = std::move(f);
}

const DenseMatrix& HodlrMatrix::leaf(index_t j) const {
  require(j >= 0 && j < partition_.num_leaves(), "HodlrMatrix::leaf: index out of range");
  return leaves_[std::size_t(j)];
}

void HodlrMatrix::set_leaf(index_t j, DenseMatrix d) {
  require(j >= 0 && j < partition_.num_leaves(), "HodlrMatrix::set_leaf: index out of range");
  const index_t n = partition_.leaf(j).size();
  require(d.rows() == n && d.cols() == n, "HodlrMatrix::set_leaf: shape mismatch");
  require(all_finite(d), "HodlrMatrix::set_leaf: non-finite leaf");
  leaves_[std::size_t(j)] = std::move(d);
}

namespace {

// Contribution of one sibling pair: the upper block and its mirrored
// transpose. Shared by the serial and parallel schedules so both produce
// identical bits.
void apply_pair(const LowRankFactor& f, const IndexRange& left, const IndexRange& right,
                const DenseMatrix& x, DenseMatrix& y) {
  if (f.rank() == 0) return;
  const auto xl = x.middleRows(left.begin, left.size());
  const auto xr = x.middleRows(right.begin, right.size());
  DenseMatrix t = f.v.transpose() * xr;
  t.array().colwise() *= f.sigma.array();
  y.middleRows(left.begin, left.size()).noalias() += f.u * t;
  DenseMatrix s = f.u.transpose() * xl;
  s.array().colwise() *= f.sigma.array();
  y.middleRows(right.begin, right.size()).noalias() += f.v * s;
}

}  // namespace

DenseMatrix HodlrMatrix::apply(const DenseMatrix& x, Exec exec) const {
  require(x.rows() == size(), "HodlrMatrix::apply: row count mismatch");
  DenseMatrix y = DenseMatrix::Zero(x.rows(), x.cols());

  for (int l = 1; l <= depth(); ++l) {
    const index_t pairs = partition_.num_pairs(l);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && pairs > 1)
#endif
    for (index_t j = 0; j < pairs; ++j) {
      apply_pair(factors_[std::size_t(l) - 1][std::size_t(j)], partition_.block(l, 2 * j),
                 partition_.block(l, 2 * j + 1), x, y);
    }
  }

  const index_t leaves = partition_.num_leaves();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && leaves > 1)
#endif
  for (index_t j = 0; j < leaves; ++j) {
    const IndexRange r = partition_.leaf(j);
    y.middleRows(r.begin, r.size()).noalias() +=
        leaves_[std::size_t(j)] * x.middleRows(r.begin, r.size());
  }
  return y;
}

Vector HodlrMatrix::apply(const Vector& x, Exec exec) const {
  return Vector(apply(DenseMatrix(x), exec).col(0));
}

DenseMatrix HodlrMatrix::densify() const {
  require(size() <= kSmallMatrixCap, "HodlrMatrix::densify: size exceeds the small-matrix cap");
  DenseMatrix a = DenseMatrix::Zero(size(), size());
  for (int l = 1; l <= depth(); ++l) {
    for (index_t j = 0; j < partition_.num_pairs(l); ++j) {
      const IndexRange left = partition_.block(l, 2 * j);
      const IndexRange right = partition_.block(l, 2 * j + 1);
      const DenseMatrix b = factors_[std::size_t(l) - 1][std::size_t(j)].dense();
      a.block(left.begin, right.begin, left.size(), right.size()) = b;
      a.block(right.begin, left.begin, right.size(), left.size()) = b.transpose();
    }
  }
  for (index_t j = 0; j < partition_.num_leaves(); ++j) {
    const IndexRange r = partition_.leaf(j);
    a.block(r.begin, r.begin, r.size(), r.size()) = leaves_[std::size_t(j)];
  }
  return a;
}

std::uint64_t HodlrMatrix::storage_count() const {
  std::uint64_t count = 0;
  for (const auto& level : factors_) {
    for (const auto& f : level)
      count += std::uint64_t(f.u.size()) + std::uint64_t(f.sigma.size()) +
               std::uint64_t(f.v.size());
  }
  for (const auto& d : leaves_) count += std::uint64_t(d.size());
  return count;
}

double HodlrMatrix::frob_norm() const {
  double sq = 0.0;
  for (const auto& level : factors_) {
    for (const auto& f : level) sq += 2.0 * f.sigma.squaredNorm();
  }
  for (const auto& d : leaves_) sq += d.squaredNorm();
  return std::sqrt(sq);
}

HodlrMatrix HodlrMatrix::add_scaled_identity(double c) const {
  HodlrMatrix out = *this;
  for (auto& d : out.leaves_) d.diagonal().array() += c;
  return out;
}

std::uint64_t HodlrMatrix::apply_madds_per_column() const {
  std::uint64_t madds = 0;
  for (const auto& level : factors_) {
    for (const auto& f : level) {
      const std::uint64_t r = std::uint64_t(f.rank());
      madds += 2 * r * std::uint64_t(f.u.rows() + f.v.rows() + 1);
    }
  }
  for (const auto& d : leaves_) madds += std::uint64_t(d.rows()) * std::uint64_t(d.cols());
  return madds;
}

DenseMatrix hodlr_apply_reference(const HodlrMatrix& h, const DenseMatrix& x) {
  require(x.rows() == h.size(), "hodlr_apply_reference: row count mismatch");
  const HierPartition& p = h.partition();
  DenseMatrix y = DenseMatrix::Zero(x.rows(), x.cols());
  for (index_t c = 0; c < x.cols(); ++c) {
    for (int l = 1; l <= p.depth(); ++l) {
      for (index_t j = 0; j < p.num_pairs(l); ++j) {
        const LowRankFactor& f = h.factor(l, j);
        const IndexRange left = p.block(l, 2 * j);
        const IndexRange right = p.block(l, 2 * j + 1);
        for (index_t k = 0; k < f.rank(); ++k) {
          double tv = 0.0, tu = 0.0;
          for (index_t i = 0; i < right.size(); ++i) tv += f.v(i, k) * x(right.begin + i, c);
          for (index_t i = 0; i < left.size(); ++i) tu += f.u(i, k) * x(left.begin + i, c);
          tv *= f.sigma(k);
          tu *= f.sigma(k);
          for (index_t i = 0; i < left.size(); ++i) y(left.begin + i, c) += f.u(i, k) * tv;
          for (index_t i = 0; i < right.size(); ++i) y(right.begin + i, c) += f.v(i, k) * tu;
        }
      }
    }
    for (index_t j = 0; j < p.num_leaves(); ++j) {
      const IndexRange r = p.leaf(j);
      const DenseMatrix& d = h.leaf(j);
      for (index_t row = 0; row < r.size(); ++row) {
        double acc = 0.0;
        for (index_t col = 0; col < r.size(); ++col) acc += d(row, col) * x(r.begin + col, c);
        y(r.begin + row, c) += acc;
      }
    }
  }
  return y;
}

namespace {

void append_payload(std::string& payload, const double* data, std::size_t count) {
  const std::size_t bytes = count * sizeof(double);
  const std::size_t at = payload.size();
  payload.resize(at + bytes);
  std::memcpy(payload.data() + at, data, bytes);
}

}  // namespace

void HodlrMatrix::save(const std::string& path) const {
  json blocks = json::array();
  json leaves = json::array();
  std::string payload;

  for (int l = 1; l <= depth(); ++l) {
    for (index_t j = 0; j < partition_.num_pairs(l); ++j) {
      const LowRankFactor& f = factor(l, j);
      json b;
      b["level"] = l;
      b["pair"] = j;
      b["rank"] = f.rank();
      b["rows"] = f.u.rows();
      b["cols"] = f.v.rows();
      b["u_offset"] = payload.size();
      append_payload(payload, f.u.data(), std::size_t(f.u.size()));
      b["sigma_offset"] = payload.size();
      append_payload(payload, f.sigma.data(), std::size_t(f.sigma.size()));
      b["v_offset"] = payload.size();
      append_payload(payload, f.v.data(), std::size_t(f.v.size()));
      blocks.push_back(std::move(b));
    }
  }
  for (index_t j = 0; j < partition_.num_leaves(); ++j) {
    json b;
    b["index"] = j;
    b["size"] = leaves_[std::size_t(j)].rows();
    b["offset"] = payload.size();
    append_payload(payload, leaves_[std::size_t(j)].data(),
                   std::size_t(leaves_[std::size_t(j)].size()));
    leaves.push_back(std::move(b));
  }

  json header;
  header["format"] = "HODLR1";
  header["n"] = size();
  header["depth"] = depth();
  header["leaf_size"] = partition_.max_leaf_size();
  header["blocks"] = std::move(blocks);
  header["leaves"] = std::move(leaves);
  header["payload_bytes"] = payload.size();
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "HodlrMatrix::save: cannot open " + path);
  out.write("HODLR1\n", 7);
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), std::streamsize(header_str.size()));
  out.write(payload.data(), std::streamsize(payload.size()));
  require(out.good(), "HodlrMatrix::save: write failed for " + path);
}

HodlrMatrix HodlrMatrix::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "HodlrMatrix::load: cannot open " + path);

  char magic[7];
  in.read(magic, 7);
  require(in.good() && std::memcmp(magic, "HODLR1\n", 7) == 0,
          "HodlrMatrix::load: bad magic, not a HODLR1 container");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), std::streamsize(header_len));
  require(in.good(), "HodlrMatrix::load: truncated header");

  const json header = json::parse(header_str);
  require(header.at("format") == "HODLR1", "HodlrMatrix::load: unknown format version");
  const index_t n = header.at("n").get<index_t>();
  const int depth = header.at("depth").get<int>();

  std::string payload(header.at("payload_bytes").get<std::size_t>(), '\0');
  in.read(payload.data(), std::streamsize(payload.size()));
  require(in.good(), "HodlrMatrix::load: truncated payload");

  auto read_block = [&](std::size_t offset, index_t rows, index_t cols) {
    DenseMatrix m(rows, cols);
    const std::size_t bytes = std::size_t(m.size()) * sizeof(double);
    require(offset + bytes <= payload.size(), "HodlrMatrix::load: offset out of range");
    std::memcpy(m.data(), payload.data() + offset, bytes);
    return m;
  };

  HodlrMatrix h(HierPartition(n, depth));
  for (const auto& b : header.at("blocks")) {
    const int level = b.at("level").get<int>();
    const index_t pair = b.at("pair").get<index_t>();
    const index_t rank = b.at("rank").get<index_t>();
    const index_t rows = b.at("rows").get<index_t>();
    const index_t cols = b.at("cols").get<index_t>();
    LowRankFactor f;
    f.u = read_block(b.at("u_offset").get<std::size_t>(), rows, rank);
    f.sigma = read_block(b.at("sigma_offset").get<std::size_t>(), rank, 1).col(0);
    f.v = read_block(b.at("v_offset").get<std::size_t>(), cols, rank);
    h.set_factor(level, pair, std::move(f));
  }
  for (const auto& b : header.at("leaves")) {
    const index_t j = b.at("index").get<index_t>();
    const index_t sz = b.at("size").get<index_t>();
    h.set_leaf(j, read_block(b.at("offset").get<std::size_t>(), sz, sz));
  }
  return h;
}

HodlrMatrix HodlrMatrix::from_dense(const DenseMatrix& a, const HierPartition& partition,
                                    double block_abs_tol) {
  require(a.rows() == a.cols() && a.rows() == partition.size(),
          "HodlrMatrix::from_dense: shape mismatch with partition");
  require(all_finite(a), "HodlrMatrix::from_dense: non-finite input");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          "HodlrMatrix::from_dense: input asymmetric beyond 1e-10 relative");

  HodlrMatrix h(partition);
  for (int l = 1; l <= partition.depth(); ++l) {
    for (index_t j = 0; j < partition.num_pairs(l); ++j) {
      const IndexRange left = partition.block(l, 2 * j);
      const IndexRange right = partition.block(l, 2 * j + 1);
      const DenseMatrix block = a.block(left.begin, right.begin, left.size(), right.size());
      SvdResult svd = small_svd(block);
      index_t keep = svd.sigma.size();
      if (block_abs_tol > 0.0) {
        keep = 0;
        while (keep < svd.sigma.size() && svd.sigma(keep) > block_abs_tol) ++keep;
      }
      LowRankFactor f{svd.u.leftCols(keep), svd.sigma.head(keep), svd.v.leftCols(keep)};
      h.set_factor(l, j, std::move(f));
    }
  }
  for (index_t j = 0; j < partition.num_leaves(); ++j) {
    const IndexRange r = partition.leaf(j);
    const DenseMatrix d = a.block(r.begin, r.begin, r.size(), r.size());
    h.set_leaf(j, 0.5 * (d + d.transpose()));
  }
  return h;
}

}  // namespace hodlr
