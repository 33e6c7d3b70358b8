#include "fcgnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace fcgnn {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw std::invalid_argument("tensor value count does not match shape");
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged tensor literal");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

void Tensor2::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const {
  std::ostringstream out;
  out << rows_ << "x" << cols_;
  return out.str();
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

namespace {

#if defined(__AVX512F__)
constexpr std::size_t kLanes = 8;
constexpr std::size_t kRowBlock = 8;
#else
constexpr std::size_t kLanes = 4;
constexpr std::size_t kRowBlock = 4;
#endif
typedef double vnd __attribute__((vector_size(kLanes * sizeof(double))));

constexpr std::size_t kColPanel = 2 * kLanes;
constexpr std::size_t kDepthBlock = 256;

inline vnd loadv(const double* p) {
  vnd v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

inline void storev(double* p, vnd v) { std::memcpy(p, &v, sizeof(v)); }

// acc(kRowBlock x kColPanel) += A(kRowBlock x depth) * panel(depth x kColPanel).
// `a` points at the row starts.
inline void micro_kernel(const double* const a[kRowBlock], std::size_t depth, const double* panel,
                         double* c, std::size_t ldc) {
  vnd acc[kRowBlock][2];
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    acc[r][0] = loadv(c + r * ldc);
    acc[r][1] = loadv(c + r * ldc + kLanes);
  }
  for (std::size_t p = 0; p < depth; ++p) {
    const vnd b0 = loadv(panel + p * kColPanel);
    const vnd b1 = loadv(panel + p * kColPanel + kLanes);
    for (std::size_t r = 0; r < kRowBlock; ++r) {
      const vnd av = vnd{} + a[r][p];
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
    }
  }
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    storev(c + r * ldc, acc[r][0]);
    storev(c + r * ldc + kLanes, acc[r][1]);
  }
}

}  // namespace

void gemm_accumulate(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
    throw std::invalid_argument("gemm: shape mismatch " + a.shape_string() + " * " +
                                b.shape_string() + " -> " + c.shape_string());
  }
  const std::size_t n = a.rows();
  const std::size_t depth = a.cols();
  const std::size_t m = b.cols();
  if (n == 0 || m == 0 || depth == 0) return;

  const std::size_t panels = (m + kColPanel - 1) / kColPanel;
  const std::size_t padded_m = panels * kColPanel;
  const std::size_t row_blocks = (n + kRowBlock - 1) / kRowBlock;
  std::vector<double> packed(panels * kColPanel * std::min(depth, kDepthBlock));

  for (std::size_t p0 = 0; p0 < depth; p0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, depth - p0);
    std::fill(packed.begin(), packed.end(), 0.0);
    for (std::size_t p = 0; p < kc; ++p) {
      const double* src = b.data() + (p0 + p) * m;
      for (std::size_t j = 0; j < m; ++j) {
        packed[(j / kColPanel) * kc * kColPanel + p * kColPanel + j % kColPanel] = src[j];
      }
    }

#pragma omp parallel
    {
      std::vector<double> a_pad(kRowBlock * kc, 0.0);
      std::vector<double> c_tile(kRowBlock * padded_m, 0.0);
#pragma omp for schedule(static)
      for (std::size_t blk = 0; blk < row_blocks; ++blk) {
        const std::size_t i0 = blk * kRowBlock;
        const std::size_t rows_here = std::min(kRowBlock, n - i0);
        const double* a_rows[kRowBlock];
        for (std::size_t r = 0; r < kRowBlock; ++r) {
          if (r < rows_here) {
            a_rows[r] = a.data() + (i0 + r) * depth + p0;
          } else {
            a_rows[r] = a_pad.data() + r * kc;
          }
        }
        // Every tile goes through the padded buffer so all rows and columns
        // share one instruction sequence.
        std::fill(c_tile.begin(), c_tile.end(), 0.0);
        for (std::size_t r = 0; r < rows_here; ++r) {
          std::memcpy(c_tile.data() + r * padded_m, c.data() + (i0 + r) * m, m * sizeof(double));
        }
        for (std::size_t pj = 0; pj < panels; ++pj) {
          micro_kernel(a_rows, kc, packed.data() + pj * kc * kColPanel,
                       c_tile.data() + pj * kColPanel, padded_m);
        }
        for (std::size_t r = 0; r < rows_here; ++r) {
          std::memcpy(c.data() + (i0 + r) * m, c_tile.data() + r * padded_m, m * sizeof(double));
        }
      }
    }
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows(), b.cols());
  gemm_accumulate(a, b, c);
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) { return matmul(a, transpose(b)); }

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) { return matmul(transpose(a), b); }

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols(), a.rows());
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile) {
      const std::size_t i1 = std::min(a.rows(), i0 + kTile);
      const std::size_t j1 = std::min(a.cols(), j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
      }
    }
  }
  return t;
}

void add_inplace(Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

void scale_inplace(Tensor2& a, double s) {
  for (double& v : a.values()) v *= s;
}

Tensor2 column_sums(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += r[j];
  }
  return out;
}

Tensor2 hconcat(std::span<const Tensor2> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) {
      throw std::invalid_argument("hconcat: row mismatch " + b.shape_string() + " vs " +
                                  blocks.front().shape_string());
    }
    cols += b.cols();
  }
  Tensor2 out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double* dst = out.row(i).data();
    for (const auto& b : blocks) {
      std::memcpy(dst, b.row(i).data(), b.cols() * sizeof(double));
      dst += b.cols();
    }
  }
  return out;
}

std::vector<Tensor2> hsplit(const Tensor2& a, std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total != a.cols()) throw std::invalid_argument("hsplit: widths do not sum to column count");
  std::vector<Tensor2> out;
  std::size_t offset = 0;
  for (auto w : widths) {
    Tensor2 block(a.rows(), w);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::memcpy(block.row(i).data(), a.row(i).data() + offset, w * sizeof(double));
    }
    out.push_back(std::move(block));
    offset += w;
  }
  return out;
}

Tensor2 gather_rows(const Tensor2& a, std::span<const std::size_t> index) {
  Tensor2 out(index.size(), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) throw std::out_of_range("gather_rows: index out of range");
    std::memcpy(out.row(i).data(), a.row(index[i]).data(), a.cols() * sizeof(double));
  }
  return out;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

double order_independent_sum(std::span<double> scratch) {
  std::sort(scratch.begin(), scratch.end());
  double s = 0.0;
  for (double v : scratch) s += v;
  return s;
}

std::vector<std::size_t> lexicographic_row_order(const Tensor2& a) {
  std::vector<std::size_t> order(a.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&a](std::size_t x, std::size_t y) {
    auto rx = a.row(x);
    auto ry = a.row(y);
    return std::lexicographical_compare(rx.begin(), rx.end(), ry.begin(), ry.end());
  });
  return order;
}

}  // namespace fcgnn
