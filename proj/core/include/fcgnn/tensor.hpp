#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fcgnn {

// Dense row-major matrix of doubles.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values);
  Tensor2(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor2& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Throws std::invalid_argument naming both shapes unless they agree.
void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what);

// c += a * b. Each output element accumulates over the inner dimension in
// ascending order through a single code path, so a row of the result depends
// only on the matching row of `a` (never on its position or the row count).
void gemm_accumulate(const Tensor2& a, const Tensor2& b, Tensor2& c);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);     // a b
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);  // a b^T
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);  // a^T b
Tensor2 transpose(const Tensor2& a);

void add_inplace(Tensor2& a, const Tensor2& b);
void scale_inplace(Tensor2& a, double s);
Tensor2 column_sums(const Tensor2& a);

// Column-wise concatenation of equally tall blocks, and its inverse.
Tensor2 hconcat(std::span<const Tensor2> blocks);
std::vector<Tensor2> hsplit(const Tensor2& a, std::span<const std::size_t> widths);

// Rows selected (and repeated) by index.
Tensor2 gather_rows(const Tensor2& a, std::span<const std::size_t> index);

double max_abs_diff(const Tensor2& a, const Tensor2& b);

// Sum of values in ascending order. Independent of the input ordering, which
// is what permutation-invariant reductions rely on.
double order_independent_sum(std::span<double> scratch);

// Row indices ordered by lexicographic row content. Equal rows are
// interchangeable, so reductions that visit rows in this order give results
// that do not depend on how the rows were numbered.
std::vector<std::size_t> lexicographic_row_order(const Tensor2& a);

}  // namespace fcgnn
