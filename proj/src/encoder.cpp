#include "gdt/encoder.hpp"

#include <string>

#include "gdt/errors.hpp"

namespace gdt {

void EncoderConfig::validate() const {
  if (num_layers < 0) throw Error("encoder config: num_layers must be >= 0");
  if (d_model < 1 || num_heads < 1 || ffn_size < 1 || k_max < 1 || max_len < 1)
    throw Error("encoder config: dimensions must be positive");
  if (d_model % num_heads != 0)
    throw ShapeError("encoder config: d_model " + std::to_string(d_model) +
                     " not divisible by num_heads " + std::to_string(num_heads));
}

LayerParamIds leaf_layer_params(Tape& tape, LeafMap& leaves, const EncoderLayerParams& p) {
  LayerParamIds ids;
  ids.heads.reserve(p.heads.size());
  for (const auto& h : p.heads) ids.heads.push_back(leaf_head_params(tape, leaves, h));
  ids.w_o = leaves.get(tape, p.w_o);
  ids.ffn_w1 = leaves.get(tape, p.ffn_w1);
  ids.ffn_b1 = leaves.get(tape, p.ffn_b1);
  ids.ffn_w2 = leaves.get(tape, p.ffn_w2);
  ids.ffn_b2 = leaves.get(tape, p.ffn_b2);
  ids.ln1_gain = leaves.get(tape, p.ln1_gain);
  ids.ln1_bias = leaves.get(tape, p.ln1_bias);
  ids.ln2_gain = leaves.get(tape, p.ln2_gain);
  ids.ln2_bias = leaves.get(tape, p.ln2_bias);
  return ids;
}

Tape::Id taped_layer_forward(Tape& tape, Tape::Id x, Tape::Id relpos, Tape::Id abs_pos,
                             const LayerParamIds& params, const EncoderConfig& config,
                             const std::vector<uint8_t>& mask, const AttentionOptions& opts,
                             std::vector<HeadTraceIds>* trace_ids) {
  Tape::Id attn = taped_multi_head_forward(tape, x, relpos, abs_pos, config.k_max, params.heads,
                                           params.w_o, config.variant, mask, opts, trace_ids);
  Tape::Id y = tape.layer_norm_rows(tape.add(x, attn), params.ln1_gain, params.ln1_bias);
  Tape::Id hidden = tape.relu(tape.add_row(tape.matmul(y, params.ffn_w1), params.ffn_b1));
  Tape::Id ffn = tape.add_row(tape.matmul(hidden, params.ffn_w2), params.ffn_b2);
  return tape.layer_norm_rows(tape.add(y, ffn), params.ln2_gain, params.ln2_bias);
}

Tape::Id taped_encoder_forward(Tape& tape, LeafMap& leaves, const std::vector<int>& ids,
                               const std::vector<uint8_t>& mask, const Matrix& content_embedding,
                               const Matrix& relpos_embedding, const Matrix& abs_pos_embedding,
                               const std::vector<EncoderLayerParams>& layers,
                               const EncoderConfig& config,
                               std::vector<std::vector<HeadTraceIds>>* trace_ids) {
  config.validate();
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw Error("encoder_forward: empty token sequence");
  if (n > config.max_len)
    throw Error("encoder_forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                std::to_string(config.max_len));
  if (mask.size() != ids.size())
    throw ShapeError("encoder_forward: mask length " + std::to_string(mask.size()) +
                     " vs ids length " + std::to_string(ids.size()));

  Tape::Id embedding_table = leaves.get(tape, content_embedding);
  Tape::Id x = tape.gather_rows(embedding_table, ids);

  Tape::Id relpos = -1;
  if (config.variant != AttentionVariant::Entangled)
    relpos = leaves.get(tape, relpos_embedding);

  Tape::Id abs_rows = -1;
  if (config.variant == AttentionVariant::Entangled) {
    Tape::Id abs_table = leaves.get(tape, abs_pos_embedding);
    std::vector<int> positions(n);
    for (int i = 0; i < n; ++i) positions[i] = i;
    abs_rows = tape.gather_rows(abs_table, positions);
  }

  AttentionOptions opts;
  opts.literal_scaling = config.literal_scaling;

  if (trace_ids) trace_ids->clear();
  for (const auto& layer : layers) {
    LayerParamIds layer_ids = leaf_layer_params(tape, leaves, layer);
    std::vector<HeadTraceIds> layer_trace;
    x = taped_layer_forward(tape, x, relpos, abs_rows, layer_ids, config, mask, opts,
                            trace_ids ? &layer_trace : nullptr);
    if (trace_ids) trace_ids->push_back(std::move(layer_trace));
  }
  return x;
}

Matrix layer_forward(const Matrix& x, const EncoderLayerParams& params, const EncoderConfig& config,
                     const RelativePositionTable& relpos, const Matrix* abs_pos,
                     const std::vector<uint8_t>& mask) {
  Tape tape;
  LeafMap leaves;
  Tape::Id x_id = tape.input(x);
  Tape::Id relpos_id = relpos.table.empty() ? -1 : tape.input(relpos.table);
  Tape::Id abs_id = -1;
  if (config.variant == AttentionVariant::Entangled) {
    if (!abs_pos || abs_pos->rows < x.rows)
      throw ShapeError("layer_forward: absolute position table must cover n rows");
    Matrix rows(x.rows, abs_pos->cols);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < abs_pos->cols; ++j) rows(i, j) = (*abs_pos)(i, j);
    abs_id = tape.input(rows);
  }
  AttentionOptions opts;
  opts.literal_scaling = config.literal_scaling;
  LayerParamIds ids = leaf_layer_params(tape, leaves, params);
  return tape.value(taped_layer_forward(tape, x_id, relpos_id, abs_id, ids, config, mask, opts));
}

Matrix encoder_forward(const std::vector<int>& ids, const std::vector<uint8_t>& mask,
                       const Matrix& content_embedding, const Matrix& relpos_embedding,
                       const Matrix& abs_pos_embedding,
                       const std::vector<EncoderLayerParams>& layers, const EncoderConfig& config,
                       std::vector<std::vector<AttentionTrace>>* traces) {
  Tape tape;
  LeafMap leaves;
  std::vector<std::vector<HeadTraceIds>> trace_ids;
  Tape::Id out = taped_encoder_forward(tape, leaves, ids, mask, content_embedding,
                                       relpos_embedding, abs_pos_embedding, layers, config,
                                       traces ? &trace_ids : nullptr);
  if (traces) {
    traces->clear();
    for (const auto& layer : trace_ids) {
      std::vector<AttentionTrace> layer_traces;
      for (const auto& head : layer) layer_traces.push_back(extract_trace(tape, head));
      traces->push_back(std::move(layer_traces));
    }
  }
  return tape.value(out);
}

}  // namespace gdt
