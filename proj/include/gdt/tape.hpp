#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gdt/matrix.hpp"

namespace gdt {

/// Minimal reverse-mode autodiff over dense matrices.
///
/// A Tape records one forward computation as a sequence of nodes; values are
/// computed eagerly on insertion, so `value(id)` is valid immediately.
/// `backward(root)` runs the recorded adjoint program in reverse insertion
/// order and accumulates gradients into every node, including the leaves
/// inserted with `input()`. Tapes are single-use: build, backward, read, drop.
///
/// Forward values are produced by the shared kernels in matrix.hpp, so a taped
/// forward pass is bit-identical to the same sequence of plain kernel calls.
class Tape {
 public:
  using Id = int32_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Insert a leaf (parameter or input). The value is copied.
  Id input(Matrix v);

  const Matrix& value(Id id) const { return nodes_[id].value; }
  const Matrix& grad(Id id) const { return nodes_[id].grad; }

  Id matmul(Id a, Id b);
  Id matmul_nt(Id a, Id b);  // a * b^T
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id hadamard(Id a, Id b);
  Id scale(Id a, double s);
  /// m (n×c) plus a 1×c row broadcast over all n rows.
  Id add_row(Id m, Id row);
  Id relu(Id a);
  Id sigmoid(Id a);
  Id softmax_rows_masked(Id a, std::vector<uint8_t> mask);
  Id layer_norm_rows(Id x, Id gain, Id bias, double eps = 1e-5);
  Id concat_cols(Id a, Id b);
  Id slice_cols(Id a, int c0, int c1);
  /// out row i = table row ids[i]; backward scatter-adds into the table.
  Id gather_rows(Id table, std::vector<int> ids);
  /// full is n×(k_max+1); out[i][j] = full[i][min(|i-j|, k_max)].
  Id gather_clip_by_col(Id full, int n, int k_max);
  /// full is (k_max+1)×n; out[i][j] = full[min(|i-j|, k_max)][j].
  Id gather_clip_by_row(Id full, int n, int k_max);
  /// Mean of unmasked rows -> 1×c. mask empty = all rows live.
  Id mean_rows_masked(Id a, std::vector<uint8_t> mask);
  /// logits is 1×k; returns 1×1 loss = logsumexp(logits) - logits[target].
  Id cross_entropy_logits(Id logits, int target);

  /// Seed d(root)=seed (root must be 1×1) and propagate to all earlier nodes.
  void backward(Id root, double seed = 1.0);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // null for leaves
  };

  Id push(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_mut(Id id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace gdt
