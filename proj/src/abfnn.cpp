#include "gdt/abfnn.hpp"

#include <cmath>

#include "gdt/attention.hpp"
#include "gdt/errors.hpp"

namespace gdt {

AbfnnParamIds leaf_abfnn_params(Tape& tape, LeafMap& leaves, const AbfnnParams& p) {
  AbfnnParamIds ids;
  ids.w1 = leaves.get(tape, p.w1);
  ids.b1 = leaves.get(tape, p.b1);
  ids.w2 = leaves.get(tape, p.w2);
  ids.b2 = leaves.get(tape, p.b2);
  ids.w_q = leaves.get(tape, p.w_q);
  ids.w_k = leaves.get(tape, p.w_k);
  ids.w_v = leaves.get(tape, p.w_v);
  ids.w_r = leaves.get(tape, p.w_r);
  ids.b_r = leaves.get(tape, p.b_r);
  ids.w_m = leaves.get(tape, p.w_m);
  ids.b_m = leaves.get(tape, p.b_m);
  ids.w_out = leaves.get(tape, p.w_out);
  ids.b_out = leaves.get(tape, p.b_out);
  return ids;
}

Tape::Id taped_abfnn_logits(Tape& tape, Tape::Id x, const std::vector<uint8_t>& mask,
                            const AbfnnParamIds& p) {
  const int hidden = tape.value(p.w1).cols;

  Tape::Id branch1 = tape.relu(tape.add_row(tape.matmul(x, p.w1), p.b1));
  Tape::Id branch2 = tape.relu(tape.add_row(tape.matmul(x, p.w2), p.b2));
  Tape::Id combined = tape.add(branch2, branch1);

  Tape::Id q = tape.matmul(combined, p.w_q);
  Tape::Id k = tape.matmul(combined, p.w_k);
  Tape::Id v = tape.matmul(combined, p.w_v);
  Tape::Id weights = tape.softmax_rows_masked(
      tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(hidden))), {});
  Tape::Id attn = tape.matmul(weights, v);

  Tape::Id residual = tape.add(tape.relu(tape.add_row(tape.matmul(attn, p.w_r), p.b_r)), attn);
  Tape::Id multi =
      tape.relu(tape.add_row(tape.matmul(tape.concat_cols(residual, combined), p.w_m), p.b_m));

  Tape::Id pooled = tape.mean_rows_masked(multi, mask);
  return tape.add_row(tape.matmul(pooled, p.w_out), p.b_out);
}

Matrix branch_combine(const Matrix& x, const AbfnnParams& p) {
  if (x.cols != p.w1.rows || x.cols != p.w2.rows)
    throw ShapeError("branch_combine: input " + x.shape_str() + " does not match branch maps " +
                     p.w1.shape_str() + " / " + p.w2.shape_str());
  Matrix b1 = relu_map(addrow(matmul(x, p.w1), p.b1));
  Matrix b2 = relu_map(addrow(matmul(x, p.w2), p.b2));
  return add(b2, b1);
}

Matrix feature_attention(const Matrix& h_combined, const AbfnnParams& p) {
  const int hidden = p.w_q.cols;
  Matrix q = matmul(h_combined, p.w_q);
  Matrix k = matmul(h_combined, p.w_k);
  Matrix v = matmul(h_combined, p.w_v);
  Matrix weights =
      softmax_rows(scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(hidden))));
  return matmul(weights, v);
}

Matrix residual_multiscale(const Matrix& attn, const Matrix& h_combined, const AbfnnParams& p) {
  if (!attn.same_shape(h_combined))
    throw ShapeError("residual_multiscale: attention " + attn.shape_str() +
                     " vs combined " + h_combined.shape_str());
  Matrix residual = add(relu_map(addrow(matmul(attn, p.w_r), p.b_r)), attn);
  Matrix joined(attn.rows, attn.cols + h_combined.cols);
  for (int i = 0; i < attn.rows; ++i) {
    for (int j = 0; j < attn.cols; ++j) joined(i, j) = residual(i, j);
    for (int j = 0; j < h_combined.cols; ++j) joined(i, attn.cols + j) = h_combined(i, j);
  }
  return relu_map(addrow(matmul(joined, p.w_m), p.b_m));
}

Matrix classify(const Matrix& h_multi, const std::vector<uint8_t>& mask, const AbfnnParams& p) {
  if (!mask.empty() && static_cast<int>(mask.size()) != h_multi.rows)
    throw ShapeError("classify: mask length " + std::to_string(mask.size()) + " vs rows " +
                     std::to_string(h_multi.rows));
  auto live = [&](int i) { return mask.empty() || mask[i] != 0; };
  int live_count = 0;
  for (int i = 0; i < h_multi.rows; ++i)
    if (live(i)) ++live_count;
  if (live_count == 0) throw Error("classify: every position is masked");
  Matrix pooled(1, h_multi.cols);
  for (int i = 0; i < h_multi.rows; ++i)
    if (live(i))
      for (int j = 0; j < h_multi.cols; ++j) pooled(0, j) += h_multi(i, j);
  for (int j = 0; j < h_multi.cols; ++j) pooled(0, j) /= live_count;
  return softmax_rows(addrow(matmul(pooled, p.w_out), p.b_out));
}

Matrix abfnn_forward(const Matrix& x, const std::vector<uint8_t>& mask, const AbfnnParams& p) {
  Matrix combined = branch_combine(x, p);
  Matrix attn = feature_attention(combined, p);
  Matrix multi = residual_multiscale(attn, combined, p);
  return classify(multi, mask, p);
}

}  // namespace gdt
