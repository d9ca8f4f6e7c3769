#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "gdt/embeddings.hpp"
#include "gdt/matrix.hpp"
#include "gdt/tape.hpp"

namespace gdt {

/// The three attention flavors built here:
///  - Entangled: content and absolute position embeddings are summed before a
///    single query/key projection (the classic baseline).
///  - DisentangledStatic: separate content/content, content/position and
///    position/content score terms over clipped relative distances.
///  - DisentangledGated: same three terms, but the content-to-position term is
///    rescaled per token pair by a learned sigmoid gate.
enum class AttentionVariant { Entangled, DisentangledStatic, DisentangledGated };

const char* variant_name(AttentionVariant v);
std::optional<AttentionVariant> variant_from_name(const std::string& name);

/// Per-head parameters, all head_dim × head_dim. Every field is allocated for
/// every variant; a variant simply does not read the fields it has no use for
/// (their gradients stay exactly zero).
struct AttentionHeadParams {
  Matrix w_q_c;  // content query
  Matrix w_k_c;  // content key
  Matrix w_q_p;  // position query (disentangled variants)
  Matrix w_k_p;  // position key (disentangled variants)
  Matrix w_v;    // value
  Matrix w_g;    // gate (gated variant)
};

/// Everything a forward pass of one head produces, for inspection and export.
/// Score components are raw (pre total-score scaling); fields a variant does
/// not compute are empty optionals.
struct AttentionTrace {
  std::optional<Matrix> scores_cc;
  std::optional<Matrix> scores_cp;
  std::optional<Matrix> scores_pc;
  std::optional<Matrix> gate;
  Matrix weights;  // n×n, rows sum to 1 over unmasked columns
  Matrix output;   // n×head_dim
};

struct AttentionOptions {
  /// Also divide every score component by sqrt(head_dim) before the combined
  /// sqrt(3*head_dim) scaling (an alternative double-scaled reading; off by
  /// default).
  bool literal_scaling = false;
  /// Test hook: replace the gate with the constant 1, which must reduce the
  /// gated variant to the static one.
  bool force_gate_one = false;
};

/// Shared leaf registry so the same parameter Matrix maps to one tape node.
class LeafMap {
 public:
  Tape::Id get(Tape& tape, const Matrix& m) {
    auto it = ids_.find(&m);
    if (it != ids_.end()) return it->second;
    Tape::Id id = tape.input(m);
    ids_.emplace(&m, id);
    return id;
  }

 private:
  std::unordered_map<const Matrix*, Tape::Id> ids_;
};

// ---------------------------------------------------------------------------
// Definitional ops (plain matrices). These spell out the score components and
// the gate exactly; the taped builders below must agree with them.
// ---------------------------------------------------------------------------

struct ComponentScores {
  Matrix cc;  // n×n content-to-content
  Matrix cp;  // n×n content-to-position, indexed by clipped distance
  Matrix pc;  // n×n position-to-content, indexed by clipped distance
};

/// Raw interaction components for one head.
///   cc[i][j] = (C·Wqc)[i] · (C·Wkc)[j]
///   cp[i][j] = (C·Wqc)[i] · (P·Wkp)[clip(i,j)]
///   pc[i][j] = (P·Wqp)[clip(i,j)] · (C·Wkc)[j]
/// With literal_scaling each component is additionally divided by
/// sqrt(head_dim).
ComponentScores component_scores(const Matrix& content, const RelativePositionTable& relpos,
                                 const AttentionHeadParams& params, bool literal_scaling = false);

/// Gate matrix: gate[i][j] = sigmoid(q_content[i] · w_g · k_relpos[clip(i,j)]^T).
/// q_content is the already-projected n×d content query; k_relpos the
/// (k_max+1)×d projected position keys.
Matrix gate_matrix(const Matrix& q_content, const Matrix& k_relpos, const Matrix& w_g);

/// Elementwise product of the content-to-position scores with the gate.
Matrix apply_gate(const Matrix& scores_cp, const Matrix& gate);

/// Combine components, mask, normalize, and mix values:
///   A = (cc + cp_effective + pc) / sqrt(3*head_dim)
///   weights = softmax over unmasked columns; output = weights · (content·w_v)
/// head_dim is taken from w_v. Fills only weights/output of the trace.
AttentionTrace attend(const Matrix& scores_cc, const Matrix& scores_cp_effective,
                      const Matrix& scores_pc, const Matrix& content, const Matrix& w_v,
                      const std::vector<uint8_t>& mask);

// ---------------------------------------------------------------------------
// Taped forward (used for training); the plain-matrix entry points below
// delegate to it.
// ---------------------------------------------------------------------------

struct HeadParamIds {
  Tape::Id w_q_c, w_k_c, w_q_p, w_k_p, w_v, w_g;
};

HeadParamIds leaf_head_params(Tape& tape, LeafMap& leaves, const AttentionHeadParams& params);

struct HeadTraceIds {
  Tape::Id scores_cc = -1;
  Tape::Id scores_cp = -1;
  Tape::Id scores_pc = -1;
  Tape::Id gate = -1;
  Tape::Id weights = -1;
  Tape::Id output = -1;
};

/// One head on the tape. content is n×head_dim; relpos is the per-head
/// (k_max+1)×head_dim slice (disentangled variants); abs_pos the per-head
/// n×head_dim absolute-position rows (entangled variant; -1 otherwise).
Tape::Id taped_head_forward(Tape& tape, Tape::Id content, Tape::Id relpos, Tape::Id abs_pos,
                            int k_max, const HeadParamIds& params, AttentionVariant variant,
                            const std::vector<uint8_t>& mask, const AttentionOptions& opts,
                            HeadTraceIds* trace_ids = nullptr);

/// All heads on the tape: slice content (and the shared tables) into
/// head_dim-column blocks, run each head, concatenate, project by w_o.
Tape::Id taped_multi_head_forward(Tape& tape, Tape::Id content, Tape::Id relpos, Tape::Id abs_pos,
                                  int k_max, const std::vector<HeadParamIds>& heads, Tape::Id w_o,
                                  AttentionVariant variant, const std::vector<uint8_t>& mask,
                                  const AttentionOptions& opts,
                                  std::vector<HeadTraceIds>* trace_ids = nullptr);

AttentionTrace extract_trace(const Tape& tape, const HeadTraceIds& ids);

// ---------------------------------------------------------------------------
// Plain-matrix entry points (run a throwaway tape internally).
// ---------------------------------------------------------------------------

/// Full single-head forward. relpos must have dim == head_dim; abs_pos, used
/// only by the entangled variant, must cover at least content.rows rows.
AttentionTrace head_forward(const Matrix& content, const RelativePositionTable& relpos,
                            const Matrix* abs_pos, const AttentionHeadParams& params,
                            AttentionVariant variant, const std::vector<uint8_t>& mask,
                            const AttentionOptions& opts = {});

/// Multi-head forward over a d_model-wide input. relpos/abs_pos are the full
/// d_model-wide tables; every head takes its own column slice.
Matrix multi_head_forward(const Matrix& content, const std::vector<AttentionHeadParams>& heads,
                          const Matrix& w_o, const RelativePositionTable& relpos,
                          const Matrix* abs_pos, AttentionVariant variant,
                          const std::vector<uint8_t>& mask, const AttentionOptions& opts = {},
                          std::vector<AttentionTrace>* traces = nullptr);

}  // namespace gdt
