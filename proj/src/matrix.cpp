#include "gdt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gdt {

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c) {
  if (r < 0 || c < 0) throw ShapeError("matrix dimensions must be nonnegative");
  data.assign(static_cast<size_t>(r) * static_cast<size_t>(c), fill);
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

// Inner kernel shared by serial and parallel entry points so both produce the
// same instruction sequence per output row (bit-identical results).
void matmul_rows(const Matrix& a, const Matrix& b, Matrix& out, int r0, int r1) {
  const int n = a.cols;
  const int c = b.cols;
  for (int i = r0; i < r1; ++i) {
    double* out_row = &out.data[static_cast<size_t>(i) * c];
    for (int k = 0; k < n; ++k) {
      const double aik = a(i, k);
      const double* b_row = &b.data[static_cast<size_t>(k) * c];
      for (int j = 0; j < c; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void matmul_nt_rows(const Matrix& a, const Matrix& b, Matrix& out, int r0, int r1) {
  const int n = a.cols;
  const int c = b.rows;
  for (int i = r0; i < r1; ++i) {
    const double* a_row = &a.data[static_cast<size_t>(i) * n];
    for (int j = 0; j < c; ++j) {
      const double* b_row = &b.data[static_cast<size_t>(j) * n];
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
}

constexpr size_t kParallelFlopThreshold = 32768;

}  // namespace

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " vs " +
                     b.shape_str());
  Matrix out(a.rows, b.cols);
  matmul_rows(a, b, out, 0, a.rows);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " vs " +
                     b.shape_str());
  Matrix out(a.rows, b.cols);
  const size_t flops =
      static_cast<size_t>(a.rows) * static_cast<size_t>(a.cols) * static_cast<size_t>(b.cols);
  if (flops < kParallelFlopThreshold) {
    matmul_rows(a, b, out, 0, a.rows);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) matmul_rows(a, b, out, i, i + 1);
  return out;
}

Matrix matmul_nt_serial(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt: inner dimensions differ, " + a.shape_str() + " vs " +
                     b.shape_str() + "^T");
  Matrix out(a.rows, b.rows);
  matmul_nt_rows(a, b, out, 0, a.rows);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt: inner dimensions differ, " + a.shape_str() + " vs " +
                     b.shape_str() + "^T");
  Matrix out(a.rows, b.rows);
  const size_t flops =
      static_cast<size_t>(a.rows) * static_cast<size_t>(a.cols) * static_cast<size_t>(b.rows);
  if (flops < kParallelFlopThreshold) {
    matmul_nt_rows(a, b, out, 0, a.rows);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) matmul_nt_rows(a, b, out, i, i + 1);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ShapeError("matmul_tn: inner dimensions differ, " + a.shape_str() + "^T vs " +
                     b.shape_str());
  Matrix out(a.cols, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* b_row = &b.data[static_cast<size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      double* out_row = &out.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data) v *= s;
  return out;
}

Matrix addrow(const Matrix& m, const Matrix& row) {
  if (row.rows != 1 || row.cols != m.cols)
    throw ShapeError("addrow: row must be 1x" + std::to_string(m.cols) + ", got " +
                     row.shape_str());
  Matrix out = m;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += row(0, j);
  return out;
}

Matrix softmax_rows(const Matrix& m) { return softmax_rows_masked(m, {}); }

Matrix softmax_rows_masked(const Matrix& m, const std::vector<uint8_t>& mask) {
  if (!mask.empty() && static_cast<int>(mask.size()) != m.cols)
    throw ShapeError("softmax_rows_masked: mask size " + std::to_string(mask.size()) +
                     " vs cols " + std::to_string(m.cols));
  auto live = [&](int j) { return mask.empty() || mask[j] != 0; };
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.cols; ++j)
      if (live(j)) mx = std::max(mx, m(i, j));
    if (mx == -std::numeric_limits<double>::infinity())
      throw Error("softmax_rows_masked: row " + std::to_string(i) + " has every position masked");
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      if (live(j)) {
        out(i, j) = std::exp(m(i, j) - mx);
        sum += out(i, j);
      }
    }
    for (int j = 0; j < m.cols; ++j)
      if (live(j)) out(i, j) /= sum;
  }
  return out;
}

Matrix sigmoid_map(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data) {
    double y;
    if (v >= 0.0) {
      y = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y = e / (1.0 + e);
    }
    // keep the open-interval invariant under saturation
    if (y >= 1.0) y = std::nextafter(1.0, 0.0);
    if (y <= 0.0) y = std::nextafter(0.0, 1.0);
    v = y;
  }
  return out;
}

Matrix relu_map(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix glorot_init(int rows, int cols, SeededRng& rng) {
  if (rows < 1 || cols < 1) throw ShapeError("glorot_init: dimensions must be >= 1");
  const double bound = std::sqrt(6.0 / (static_cast<double>(rows) + static_cast<double>(cols)));
  Matrix out(rows, cols);
  for (double& v : out.data) v = rng.uniform_range(-bound, bound);
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double d = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

}  // namespace gdt
