#include "gdt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace gdt {

namespace {

void accumulate(Matrix& dst, const Matrix& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

int clip_dist(int i, int j, int k_max) { return std::min(std::abs(i - j), k_max); }

}  // namespace

Tape::Id Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Matrix(value.rows, value.cols);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Matrix v) { return push(std::move(v), nullptr); }

Tape::Id Tape::matmul(Id a, Id b) {
  Id out = push(gdt::matmul(value(a), value(b)), nullptr);
  nodes_[out].back = [a, b, out](Tape& t) {
    const Matrix& g = t.grad(out);
    accumulate(t.grad_mut(a), gdt::matmul_nt(g, t.value(b)));
    accumulate(t.grad_mut(b), gdt::matmul_tn(t.value(a), g));
  };
  return out;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  Id out = push(gdt::matmul_nt(value(a), value(b)), nullptr);
  nodes_[out].back = [a, b, out](Tape& t) {
    const Matrix& g = t.grad(out);
    accumulate(t.grad_mut(a), gdt::matmul(g, t.value(b)));
    accumulate(t.grad_mut(b), gdt::matmul_tn(g, t.value(a)));
  };
  return out;
}

Tape::Id Tape::add(Id a, Id b) {
  Id out = push(gdt::add(value(a), value(b)), nullptr);
  nodes_[out].back = [a, b, out](Tape& t) {
    accumulate(t.grad_mut(a), t.grad(out));
    accumulate(t.grad_mut(b), t.grad(out));
  };
  return out;
}

Tape::Id Tape::sub(Id a, Id b) {
  Id out = push(gdt::sub(value(a), value(b)), nullptr);
  nodes_[out].back = [a, b, out](Tape& t) {
    accumulate(t.grad_mut(a), t.grad(out));
    const Matrix& g = t.grad(out);
    Matrix& gb = t.grad_mut(b);
    for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
  };
  return out;
}

Tape::Id Tape::hadamard(Id a, Id b) {
  Id out = push(gdt::hadamard(value(a), value(b)), nullptr);
  nodes_[out].back = [a, b, out](Tape& t) {
    accumulate(t.grad_mut(a), gdt::hadamard(t.grad(out), t.value(b)));
    accumulate(t.grad_mut(b), gdt::hadamard(t.grad(out), t.value(a)));
  };
  return out;
}

Tape::Id Tape::scale(Id a, double s) {
  Id out = push(gdt::scale(value(a), s), nullptr);
  nodes_[out].back = [a, s, out](Tape& t) {
    accumulate(t.grad_mut(a), gdt::scale(t.grad(out), s));
  };
  return out;
}

Tape::Id Tape::add_row(Id m, Id row) {
  const Matrix& mv = value(m);
  const Matrix& rv = value(row);
  if (rv.rows != 1 || rv.cols != mv.cols)
    throw ShapeError("add_row: row must be 1x" + std::to_string(mv.cols) + ", got " +
                     rv.shape_str());
  Matrix out = mv;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += rv(0, j);
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [m, row, id](Tape& t) {
    const Matrix& g = t.grad(id);
    accumulate(t.grad_mut(m), g);
    Matrix& gr = t.grad_mut(row);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) gr(0, j) += g(i, j);
  };
  return id;
}

Tape::Id Tape::relu(Id a) {
  Id out = push(relu_map(value(a)), nullptr);
  nodes_[out].back = [a, out](Tape& t) {
    const Matrix& g = t.grad(out);
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad_mut(a);
    for (size_t i = 0; i < ga.data.size(); ++i)
      if (x.data[i] > 0.0) ga.data[i] += g.data[i];
  };
  return out;
}

Tape::Id Tape::sigmoid(Id a) {
  Id out = push(sigmoid_map(value(a)), nullptr);
  nodes_[out].back = [a, out](Tape& t) {
    const Matrix& g = t.grad(out);
    const Matrix& y = t.value(out);
    Matrix& ga = t.grad_mut(a);
    for (size_t i = 0; i < ga.data.size(); ++i)
      ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  };
  return out;
}

Tape::Id Tape::softmax_rows_masked(Id a, std::vector<uint8_t> mask) {
  Id out = push(gdt::softmax_rows_masked(value(a), mask), nullptr);
  nodes_[out].back = [a, out, mask = std::move(mask)](Tape& t) {
    const Matrix& w = t.value(out);
    const Matrix& g = t.grad(out);
    Matrix& ga = t.grad_mut(a);
    auto live = [&](int j) { return mask.empty() || mask[j] != 0; };
    for (int i = 0; i < w.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < w.cols; ++j)
        if (live(j)) dot += g(i, j) * w(i, j);
      for (int j = 0; j < w.cols; ++j)
        if (live(j)) ga(i, j) += w(i, j) * (g(i, j) - dot);
    }
  };
  return out;
}

Tape::Id Tape::layer_norm_rows(Id x, Id gain, Id bias, double eps) {
  const Matrix& xv = value(x);
  const Matrix& gv = value(gain);
  const Matrix& bv = value(bias);
  const int n = xv.rows, m = xv.cols;
  if (gv.rows != 1 || gv.cols != m || bv.rows != 1 || bv.cols != m)
    throw ShapeError("layer_norm_rows: gain/bias must be 1x" + std::to_string(m));

  Matrix xhat(n, m);
  std::vector<double> inv_std(n);
  Matrix out(n, m);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += xv(i, j);
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) {
      const double d = xv(i, j) - mean;
      var += d * d;
    }
    var /= m;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (int j = 0; j < m; ++j) {
      xhat(i, j) = (xv(i, j) - mean) * is;
      out(i, j) = xhat(i, j) * gv(0, j) + bv(0, j);
    }
  }

  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [x, gain, bias, id, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)](Tape& t) {
    const Matrix& g = t.grad(id);
    const Matrix& gv2 = t.value(gain);
    Matrix& gx = t.grad_mut(x);
    Matrix& gg = t.grad_mut(gain);
    Matrix& gb = t.grad_mut(bias);
    const int n2 = g.rows, m2 = g.cols;
    for (int i = 0; i < n2; ++i) {
      double mean_h = 0.0, mean_hx = 0.0;
      for (int j = 0; j < m2; ++j) {
        const double h = g(i, j) * gv2(0, j);
        mean_h += h;
        mean_hx += h * xhat(i, j);
        gg(0, j) += g(i, j) * xhat(i, j);
        gb(0, j) += g(i, j);
      }
      mean_h /= m2;
      mean_hx /= m2;
      for (int j = 0; j < m2; ++j) {
        const double h = g(i, j) * gv2(0, j);
        gx(i, j) += (h - mean_h - xhat(i, j) * mean_hx) * inv_std[i];
      }
    }
  };
  return id;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows != bv.rows)
    throw ShapeError("concat_cols: row counts differ, " + av.shape_str() + " vs " +
                     bv.shape_str());
  Matrix out(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
    for (int j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
  }
  const int split = av.cols;
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id, split](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& ga = t.grad_mut(a);
    Matrix& gb = t.grad_mut(b);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < split; ++j) ga(i, j) += g(i, j);
      for (int j = split; j < g.cols; ++j) gb(i, j - split) += g(i, j);
    }
  };
  return id;
}

Tape::Id Tape::slice_cols(Id a, int c0, int c1) {
  const Matrix& av = value(a);
  if (c0 < 0 || c1 > av.cols || c0 >= c1)
    throw ShapeError("slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") out of range for " + av.shape_str());
  Matrix out(av.rows, c1 - c0);
  for (int i = 0; i < av.rows; ++i)
    for (int j = c0; j < c1; ++j) out(i, j - c0) = av(i, j);
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id, c0](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& ga = t.grad_mut(a);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) ga(i, c0 + j) += g(i, j);
  };
  return id;
}

Tape::Id Tape::gather_rows(Id table, std::vector<int> ids) {
  const Matrix& tv = value(table);
  Matrix out(static_cast<int>(ids.size()), tv.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows)
      throw Error("gather_rows: row id " + std::to_string(ids[i]) + " out of range [0, " +
                  std::to_string(tv.rows) + ")");
    for (int j = 0; j < tv.cols; ++j) out(static_cast<int>(i), j) = tv(ids[i], j);
  }
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [table, id, ids = std::move(ids)](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& gt = t.grad_mut(table);
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < g.cols; ++j) gt(ids[i], j) += g(static_cast<int>(i), j);
  };
  return id;
}

Tape::Id Tape::gather_clip_by_col(Id full, int n, int k_max) {
  const Matrix& fv = value(full);
  if (fv.rows != n || fv.cols != k_max + 1)
    throw ShapeError("gather_clip_by_col: expected " + std::to_string(n) + "x" +
                     std::to_string(k_max + 1) + ", got " + fv.shape_str());
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = fv(i, clip_dist(i, j, k_max));
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [full, id, n, k_max](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& gf = t.grad_mut(full);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gf(i, clip_dist(i, j, k_max)) += g(i, j);
  };
  return id;
}

Tape::Id Tape::gather_clip_by_row(Id full, int n, int k_max) {
  const Matrix& fv = value(full);
  if (fv.rows != k_max + 1 || fv.cols != n)
    throw ShapeError("gather_clip_by_row: expected " + std::to_string(k_max + 1) + "x" +
                     std::to_string(n) + ", got " + fv.shape_str());
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = fv(clip_dist(i, j, k_max), j);
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [full, id, n, k_max](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& gf = t.grad_mut(full);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gf(clip_dist(i, j, k_max), j) += g(i, j);
  };
  return id;
}

Tape::Id Tape::mean_rows_masked(Id a, std::vector<uint8_t> mask) {
  const Matrix& av = value(a);
  if (!mask.empty() && static_cast<int>(mask.size()) != av.rows)
    throw ShapeError("mean_rows_masked: mask size " + std::to_string(mask.size()) + " vs rows " +
                     std::to_string(av.rows));
  auto live = [&](int i) { return mask.empty() || mask[i] != 0; };
  int live_count = 0;
  for (int i = 0; i < av.rows; ++i)
    if (live(i)) ++live_count;
  if (live_count == 0) throw Error("mean_rows_masked: every row is masked");
  Matrix out(1, av.cols);
  for (int i = 0; i < av.rows; ++i)
    if (live(i))
      for (int j = 0; j < av.cols; ++j) out(0, j) += av(i, j);
  for (int j = 0; j < av.cols; ++j) out(0, j) /= live_count;
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id, mask = std::move(mask), live_count](Tape& t) {
    const Matrix& g = t.grad(id);
    Matrix& ga = t.grad_mut(a);
    auto live2 = [&](int i) { return mask.empty() || mask[i] != 0; };
    for (int i = 0; i < ga.rows; ++i)
      if (live2(i))
        for (int j = 0; j < ga.cols; ++j) ga(i, j) += g(0, j) / live_count;
  };
  return id;
}

Tape::Id Tape::cross_entropy_logits(Id logits, int target) {
  const Matrix& z = value(logits);
  if (z.rows != 1) throw ShapeError("cross_entropy_logits: logits must be 1xK, got " + z.shape_str());
  if (target < 0 || target >= z.cols)
    throw Error("cross_entropy_logits: class " + std::to_string(target) + " out of range [0, " +
                std::to_string(z.cols) + ")");
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < z.cols; ++j) mx = std::max(mx, z(0, j));
  double sum = 0.0;
  for (int j = 0; j < z.cols; ++j) sum += std::exp(z(0, j) - mx);
  const double lse = mx + std::log(sum);
  Matrix out(1, 1, lse - z(0, target));
  Id id = push(std::move(out), nullptr);
  nodes_[id].back = [logits, id, target, lse](Tape& t) {
    const double g = t.grad(id)(0, 0);
    const Matrix& z2 = t.value(logits);
    Matrix& gl = t.grad_mut(logits);
    for (int j = 0; j < z2.cols; ++j) {
      const double p = std::exp(z2(0, j) - lse);
      gl(0, j) += g * (p - (j == target ? 1.0 : 0.0));
    }
  };
  return id;
}

void Tape::backward(Id root, double seed) {
  Matrix& g = grad_mut(root);
  if (g.rows != 1 || g.cols != 1)
    throw ShapeError("backward: root must be a 1x1 scalar, got " + g.shape_str());
  g(0, 0) = seed;
  for (Id i = root; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

}  // namespace gdt
