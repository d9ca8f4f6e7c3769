#pragma once

#include <vector>

#include "gdt/attention.hpp"
#include "gdt/embeddings.hpp"
#include "gdt/matrix.hpp"
#include "gdt/tape.hpp"

namespace gdt {

struct EncoderConfig {
  int num_layers = 2;
  int d_model = 32;
  int num_heads = 2;
  int ffn_size = 64;
  int k_max = 8;
  int max_len = 64;
  AttentionVariant variant = AttentionVariant::DisentangledGated;
  bool literal_scaling = false;

  int head_dim() const { return d_model / num_heads; }
  void validate() const;
};

/// One encoder layer: multi-head attention plus a two-map ReLU feedforward,
/// each wrapped in a residual connection and post layer normalization.
struct EncoderLayerParams {
  std::vector<AttentionHeadParams> heads;
  Matrix w_o;        // d_model × d_model
  Matrix ffn_w1;     // d_model × ffn_size
  Matrix ffn_b1;     // 1 × ffn_size
  Matrix ffn_w2;     // ffn_size × d_model
  Matrix ffn_b2;     // 1 × d_model
  Matrix ln1_gain;   // 1 × d_model
  Matrix ln1_bias;   // 1 × d_model
  Matrix ln2_gain;   // 1 × d_model
  Matrix ln2_bias;   // 1 × d_model
};

struct LayerParamIds {
  std::vector<HeadParamIds> heads;
  Tape::Id w_o, ffn_w1, ffn_b1, ffn_w2, ffn_b2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

LayerParamIds leaf_layer_params(Tape& tape, LeafMap& leaves, const EncoderLayerParams& p);

/// y = LN1(x + MultiHead(x)); z = LN2(y + relu(y·W1 + b1)·W2 + b2).
Tape::Id taped_layer_forward(Tape& tape, Tape::Id x, Tape::Id relpos, Tape::Id abs_pos,
                             const LayerParamIds& params, const EncoderConfig& config,
                             const std::vector<uint8_t>& mask, const AttentionOptions& opts,
                             std::vector<HeadTraceIds>* trace_ids = nullptr);

/// Embedding lookup followed by every layer; the relative position table is
/// shared by all layers. trace_ids, when given, receives one entry per layer.
Tape::Id taped_encoder_forward(Tape& tape, LeafMap& leaves, const std::vector<int>& ids,
                               const std::vector<uint8_t>& mask, const Matrix& content_embedding,
                               const Matrix& relpos_embedding, const Matrix& abs_pos_embedding,
                               const std::vector<EncoderLayerParams>& layers,
                               const EncoderConfig& config,
                               std::vector<std::vector<HeadTraceIds>>* trace_ids = nullptr);

// Plain-matrix entry points (throwaway tape inside).

Matrix layer_forward(const Matrix& x, const EncoderLayerParams& params, const EncoderConfig& config,
                     const RelativePositionTable& relpos, const Matrix* abs_pos,
                     const std::vector<uint8_t>& mask);

Matrix encoder_forward(const std::vector<int>& ids, const std::vector<uint8_t>& mask,
                       const Matrix& content_embedding, const Matrix& relpos_embedding,
                       const Matrix& abs_pos_embedding,
                       const std::vector<EncoderLayerParams>& layers, const EncoderConfig& config,
                       std::vector<std::vector<AttentionTrace>>* traces = nullptr);

}  // namespace gdt
