#pragma once

#include <vector>

#include "gdt/matrix.hpp"
#include "gdt/tape.hpp"

namespace gdt {

class LeafMap;

/// Classifier head: two position-wise ReLU branches combined by addition, one
/// self-attention pass over the sequence positions, a gated residual
/// refinement, multi-scale concatenation, masked mean pooling, and a softmax
/// output layer.
struct AbfnnParams {
  Matrix w1, b1;      // d_model × H, 1 × H (branch 1)
  Matrix w2, b2;      // d_model × H, 1 × H (branch 2)
  Matrix w_q, w_k, w_v;  // H × H
  Matrix w_r, b_r;    // H × H, 1 × H
  Matrix w_m, b_m;    // 2H × H, 1 × H
  Matrix w_out, b_out;  // H × num_classes, 1 × num_classes

  int hidden() const { return w1.cols; }
  int num_classes() const { return w_out.cols; }
};

struct AbfnnParamIds {
  Tape::Id w1, b1, w2, b2, w_q, w_k, w_v, w_r, b_r, w_m, b_m, w_out, b_out;
};

AbfnnParamIds leaf_abfnn_params(Tape& tape, LeafMap& leaves, const AbfnnParams& p);

/// Builds the full head on the tape and returns the 1×num_classes logits
/// (softmax of which is the predicted distribution).
Tape::Id taped_abfnn_logits(Tape& tape, Tape::Id x, const std::vector<uint8_t>& mask,
                            const AbfnnParamIds& params);

// Plain-matrix ops, composing to abfnn_forward.

/// relu(x·W2 + b2) + relu(x·W1 + b1), applied position-wise: n×d_model -> n×H.
Matrix branch_combine(const Matrix& x, const AbfnnParams& params);

/// Single-head self-attention over the n positions with d_k = H.
Matrix feature_attention(const Matrix& h_combined, const AbfnnParams& params);

/// relu(attn·W_r + b_r) + attn, then relu([h_residual ∥ h_combined]·W_m + b_m).
Matrix residual_multiscale(const Matrix& attn, const Matrix& h_combined, const AbfnnParams& params);

/// Masked mean pool over positions, then softmax(pooled·W_out + b_out).
/// Returns a 1×num_classes distribution.
Matrix classify(const Matrix& h_multi, const std::vector<uint8_t>& mask, const AbfnnParams& params);

/// The composition of the four ops above.
Matrix abfnn_forward(const Matrix& x, const std::vector<uint8_t>& mask, const AbfnnParams& params);

}  // namespace gdt
