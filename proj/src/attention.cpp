#include "gdt/attention.hpp"

#include <cmath>
#include <string>

#include "gdt/errors.hpp"

namespace gdt {

const char* variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Entangled: return "entangled";
    case AttentionVariant::DisentangledStatic: return "static";
    case AttentionVariant::DisentangledGated: return "gated";
  }
  return "?";
}

std::optional<AttentionVariant> variant_from_name(const std::string& name) {
  if (name == "entangled") return AttentionVariant::Entangled;
  if (name == "static") return AttentionVariant::DisentangledStatic;
  if (name == "gated") return AttentionVariant::DisentangledGated;
  return std::nullopt;
}

namespace {

Matrix gather_cp(const Matrix& full, int n, int k_max) {
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = full(i, clip_distance(i, j, k_max));
  return out;
}

Matrix gather_pc(const Matrix& full, int n, int k_max) {
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = full(clip_distance(i, j, k_max), j);
  return out;
}

void check_square(const Matrix& m, int d, const char* name) {
  if (m.rows != d || m.cols != d)
    throw ShapeError(std::string(name) + " must be " + std::to_string(d) + "x" +
                     std::to_string(d) + ", got " + m.shape_str());
}

}  // namespace

ComponentScores component_scores(const Matrix& content, const RelativePositionTable& relpos,
                                 const AttentionHeadParams& params, bool literal_scaling) {
  const int d = content.cols;
  if (relpos.dim() != d)
    throw ShapeError("component_scores: relpos dim " + std::to_string(relpos.dim()) +
                     " must equal head dim " + std::to_string(d));
  check_square(params.w_q_c, d, "w_q_c");
  check_square(params.w_k_c, d, "w_k_c");
  check_square(params.w_q_p, d, "w_q_p");
  check_square(params.w_k_p, d, "w_k_p");

  const int n = content.rows;
  const Matrix q_c = matmul(content, params.w_q_c);
  const Matrix k_c = matmul(content, params.w_k_c);
  const Matrix q_p = matmul(relpos.table, params.w_q_p);
  const Matrix k_p = matmul(relpos.table, params.w_k_p);

  ComponentScores s;
  s.cc = matmul_nt(q_c, k_c);
  s.cp = gather_cp(matmul_nt(q_c, k_p), n, relpos.k_max);
  s.pc = gather_pc(matmul_nt(q_p, k_c), n, relpos.k_max);
  if (literal_scaling) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    s.cc = scale(s.cc, inv);
    s.cp = scale(s.cp, inv);
    s.pc = scale(s.pc, inv);
  }
  return s;
}

Matrix gate_matrix(const Matrix& q_content, const Matrix& k_relpos, const Matrix& w_g) {
  if (w_g.rows != q_content.cols || w_g.cols != k_relpos.cols)
    throw ShapeError("gate_matrix: w_g " + w_g.shape_str() + " does not connect q " +
                     q_content.shape_str() + " to k " + k_relpos.shape_str());
  const int n = q_content.rows;
  const int k_max = k_relpos.rows - 1;
  const Matrix pre = matmul_nt(matmul(q_content, w_g), k_relpos);  // n×(k_max+1)
  return sigmoid_map(gather_cp(pre, n, k_max));
}

Matrix apply_gate(const Matrix& scores_cp, const Matrix& gate) {
  return hadamard(scores_cp, gate);
}

AttentionTrace attend(const Matrix& scores_cc, const Matrix& scores_cp_effective,
                      const Matrix& scores_pc, const Matrix& content, const Matrix& w_v,
                      const std::vector<uint8_t>& mask) {
  const int d = w_v.cols;
  const Matrix total = scale(add(add(scores_cc, scores_cp_effective), scores_pc),
                             1.0 / std::sqrt(3.0 * d));
  AttentionTrace trace;
  trace.weights = softmax_rows_masked(total, mask);
  trace.output = matmul(trace.weights, matmul(content, w_v));
  return trace;
}

HeadParamIds leaf_head_params(Tape& tape, LeafMap& leaves, const AttentionHeadParams& p) {
  HeadParamIds ids;
  ids.w_q_c = leaves.get(tape, p.w_q_c);
  ids.w_k_c = leaves.get(tape, p.w_k_c);
  ids.w_q_p = leaves.get(tape, p.w_q_p);
  ids.w_k_p = leaves.get(tape, p.w_k_p);
  ids.w_v = leaves.get(tape, p.w_v);
  ids.w_g = leaves.get(tape, p.w_g);
  return ids;
}

Tape::Id taped_head_forward(Tape& tape, Tape::Id content, Tape::Id relpos, Tape::Id abs_pos,
                            int k_max, const HeadParamIds& params, AttentionVariant variant,
                            const std::vector<uint8_t>& mask, const AttentionOptions& opts,
                            HeadTraceIds* trace_ids) {
  const int n = tape.value(content).rows;
  const int d = tape.value(content).cols;
  HeadTraceIds ids;

  Tape::Id total;
  Tape::Id value_source = content;
  if (variant == AttentionVariant::Entangled) {
    if (abs_pos < 0) throw Error("entangled attention requires an absolute position table");
    // sum content and position, then a single query/key pair
    Tape::Id x = tape.add(content, abs_pos);
    value_source = x;
    Tape::Id q = tape.matmul(x, params.w_q_c);
    Tape::Id k = tape.matmul(x, params.w_k_c);
    ids.scores_cc = tape.matmul_nt(q, k);
    total = tape.scale(ids.scores_cc, 1.0 / std::sqrt(static_cast<double>(d)));
  } else {
    if (relpos < 0) throw Error("disentangled attention requires a relative position table");
    Tape::Id q_c = tape.matmul(content, params.w_q_c);
    Tape::Id k_c = tape.matmul(content, params.w_k_c);
    Tape::Id q_p = tape.matmul(relpos, params.w_q_p);
    Tape::Id k_p = tape.matmul(relpos, params.w_k_p);

    ids.scores_cc = tape.matmul_nt(q_c, k_c);
    ids.scores_cp = tape.gather_clip_by_col(tape.matmul_nt(q_c, k_p), n, k_max);
    ids.scores_pc = tape.gather_clip_by_row(tape.matmul_nt(q_p, k_c), n, k_max);

    Tape::Id cc = ids.scores_cc;
    Tape::Id cp = ids.scores_cp;
    Tape::Id pc = ids.scores_pc;
    if (opts.literal_scaling) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(d));
      cc = tape.scale(cc, inv);
      cp = tape.scale(cp, inv);
      pc = tape.scale(pc, inv);
    }

    Tape::Id cp_effective = cp;
    if (variant == AttentionVariant::DisentangledGated) {
      if (opts.force_gate_one) {
        ids.gate = tape.input(Matrix(n, n, 1.0));
      } else {
        Tape::Id pre = tape.matmul_nt(tape.matmul(q_c, params.w_g), k_p);
        ids.gate = tape.sigmoid(tape.gather_clip_by_col(pre, n, k_max));
      }
      cp_effective = tape.hadamard(ids.gate, cp);
    }
    total = tape.scale(tape.add(tape.add(cc, cp_effective), pc),
                       1.0 / std::sqrt(3.0 * d));
  }

  ids.weights = tape.softmax_rows_masked(total, mask);
  ids.output = tape.matmul(ids.weights, tape.matmul(value_source, params.w_v));
  if (trace_ids) *trace_ids = ids;
  return ids.output;
}

Tape::Id taped_multi_head_forward(Tape& tape, Tape::Id content, Tape::Id relpos, Tape::Id abs_pos,
                                  int k_max, const std::vector<HeadParamIds>& heads, Tape::Id w_o,
                                  AttentionVariant variant, const std::vector<uint8_t>& mask,
                                  const AttentionOptions& opts,
                                  std::vector<HeadTraceIds>* trace_ids) {
  const int d_model = tape.value(content).cols;
  const int h = static_cast<int>(heads.size());
  if (h == 0 || d_model % h != 0)
    throw ShapeError("multi_head: d_model " + std::to_string(d_model) +
                     " not divisible by head count " + std::to_string(h));
  const int head_dim = d_model / h;
  if (tape.value(w_o).rows != d_model || tape.value(w_o).cols != d_model)
    throw ShapeError("multi_head: w_o must be " + std::to_string(d_model) + "x" +
                     std::to_string(d_model) + ", got " + tape.value(w_o).shape_str());

  if (trace_ids) trace_ids->clear();
  Tape::Id concat = -1;
  for (int k = 0; k < h; ++k) {
    Tape::Id c_slice = tape.slice_cols(content, k * head_dim, (k + 1) * head_dim);
    Tape::Id p_slice = relpos >= 0 ? tape.slice_cols(relpos, k * head_dim, (k + 1) * head_dim) : -1;
    Tape::Id a_slice =
        abs_pos >= 0 ? tape.slice_cols(abs_pos, k * head_dim, (k + 1) * head_dim) : -1;
    HeadTraceIds head_trace;
    Tape::Id out = taped_head_forward(tape, c_slice, p_slice, a_slice, k_max, heads[k], variant,
                                      mask, opts, &head_trace);
    if (trace_ids) trace_ids->push_back(head_trace);
    concat = (k == 0) ? out : tape.concat_cols(concat, out);
  }
  return tape.matmul(concat, w_o);
}

AttentionTrace extract_trace(const Tape& tape, const HeadTraceIds& ids) {
  AttentionTrace t;
  if (ids.scores_cc >= 0) t.scores_cc = tape.value(ids.scores_cc);
  if (ids.scores_cp >= 0) t.scores_cp = tape.value(ids.scores_cp);
  if (ids.scores_pc >= 0) t.scores_pc = tape.value(ids.scores_pc);
  if (ids.gate >= 0) t.gate = tape.value(ids.gate);
  t.weights = tape.value(ids.weights);
  t.output = tape.value(ids.output);
  return t;
}

AttentionTrace head_forward(const Matrix& content, const RelativePositionTable& relpos,
                            const Matrix* abs_pos, const AttentionHeadParams& params,
                            AttentionVariant variant, const std::vector<uint8_t>& mask,
                            const AttentionOptions& opts) {
  Tape tape;
  LeafMap leaves;
  Tape::Id content_id = tape.input(content);
  Tape::Id relpos_id = relpos.table.empty() ? -1 : tape.input(relpos.table);
  Tape::Id abs_id = -1;
  if (variant == AttentionVariant::Entangled) {
    if (!abs_pos || abs_pos->rows < content.rows)
      throw ShapeError("entangled head_forward: absolute position table must cover n rows");
    Matrix rows(content.rows, abs_pos->cols);
    for (int i = 0; i < content.rows; ++i)
      for (int j = 0; j < abs_pos->cols; ++j) rows(i, j) = (*abs_pos)(i, j);
    abs_id = tape.input(rows);
  }
  HeadParamIds ids = leaf_head_params(tape, leaves, params);
  HeadTraceIds trace_ids;
  taped_head_forward(tape, content_id, relpos_id, abs_id, relpos.k_max, ids, variant, mask, opts,
                     &trace_ids);
  return extract_trace(tape, trace_ids);
}

Matrix multi_head_forward(const Matrix& content, const std::vector<AttentionHeadParams>& heads,
                          const Matrix& w_o, const RelativePositionTable& relpos,
                          const Matrix* abs_pos, AttentionVariant variant,
                          const std::vector<uint8_t>& mask, const AttentionOptions& opts,
                          std::vector<AttentionTrace>* traces) {
  Tape tape;
  LeafMap leaves;
  Tape::Id content_id = tape.input(content);
  Tape::Id relpos_id = relpos.table.empty() ? -1 : tape.input(relpos.table);
  Tape::Id abs_id = -1;
  if (variant == AttentionVariant::Entangled) {
    if (!abs_pos || abs_pos->rows < content.rows)
      throw ShapeError("entangled multi_head_forward: absolute position table must cover n rows");
    Matrix rows(content.rows, abs_pos->cols);
    for (int i = 0; i < content.rows; ++i)
      for (int j = 0; j < abs_pos->cols; ++j) rows(i, j) = (*abs_pos)(i, j);
    abs_id = tape.input(rows);
  }
  std::vector<HeadParamIds> head_ids;
  head_ids.reserve(heads.size());
  for (const auto& h : heads) head_ids.push_back(leaf_head_params(tape, leaves, h));
  Tape::Id w_o_id = leaves.get(tape, w_o);
  std::vector<HeadTraceIds> trace_ids;
  Tape::Id out = taped_multi_head_forward(tape, content_id, relpos_id, abs_id, relpos.k_max,
                                          head_ids, w_o_id, variant, mask, opts, &trace_ids);
  if (traces) {
    traces->clear();
    for (const auto& t : trace_ids) traces->push_back(extract_trace(tape, t));
  }
  return tape.value(out);
}

}  // namespace gdt
