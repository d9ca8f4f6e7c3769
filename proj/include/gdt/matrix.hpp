#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gdt/errors.hpp"

namespace gdt {

/// Dense row-major matrix of 64-bit floats.
///
/// Matrices are plain values: copyable, immutable by convention once handed to
/// an operation, and safe to share across threads for reading. Every kernel in
/// this header is a pure function of its inputs.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // length rows*cols, row-major

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix identity(int n);

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool empty() const { return rows == 0 || cols == 0; }
  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
  bool all_finite() const;
};

/// Deterministic RNG: identical seeds give identical draw sequences on every
/// platform. All derived draws (uniform doubles, bounded ints, shuffles) are
/// implemented here rather than via std:: distributions, whose output is
/// implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Kernels. matmul-family kernels run row-parallel (OpenMP) above a size
// threshold; the *_serial variants are the reference implementations kept for
// testing and benchmarking. Parallel and serial variants accumulate in the
// same order per output element, so their results are bit-identical.
// ---------------------------------------------------------------------------

/// a (r×k) times b (k×c). Throws ShapeError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);

/// a (r×k) times b^T where b is (c×k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_nt_serial(const Matrix& a, const Matrix& b);

/// a^T (k×r) times b (r×c) where a is (r×k).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

/// m (n×c) plus a 1×c row broadcast over all n rows.
Matrix addrow(const Matrix& m, const Matrix& row);

/// Row-stable softmax: per-row max subtraction, each output row sums to 1.
Matrix softmax_rows(const Matrix& m);

/// Softmax over unmasked columns only; masked columns get weight exactly 0.
/// mask may be empty (all positions live) or have size m.cols where nonzero
/// means live. Throws Error if a row has no live column.
Matrix softmax_rows_masked(const Matrix& m, const std::vector<uint8_t>& mask);

/// Elementwise logistic sigmoid, clamped into the open interval (0, 1) so the
/// range invariant survives saturation at |x| beyond ~37.
Matrix sigmoid_map(const Matrix& m);

/// Elementwise max(0, x).
Matrix relu_map(const Matrix& m);

/// Glorot-uniform init: entries uniform in +-sqrt(6/(rows+cols)).
Matrix glorot_init(int rows, int cols, SeededRng& rng);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace gdt
