#pragma once

#include <string>
#include <vector>

#include "gdt/abfnn.hpp"
#include "gdt/dataset.hpp"
#include "gdt/encoder.hpp"

namespace gdt {

struct ModelConfig {
  EncoderConfig encoder;
  int vocab_size = 0;
  int num_classes = 0;
  int abfnn_hidden = 0;  // 0 = default to d_model

  int hidden() const { return abfnn_hidden > 0 ? abfnn_hidden : encoder.d_model; }
  void validate() const;
};

/// Encoder plus classifier head plus the shared embedding tables. The
/// absolute-position table is read only by the entangled variant and the
/// relative-position table only by the disentangled ones; unused tables and
/// weights simply receive zero gradient.
struct Model {
  ModelConfig config;
  Matrix content_embedding;  // vocab_size × d_model
  Matrix relpos_embedding;   // (k_max+1) × d_model
  Matrix abs_pos_embedding;  // max_len × d_model
  std::vector<EncoderLayerParams> layers;
  AbfnnParams head;
};

struct NamedParam {
  std::string name;
  Matrix* tensor;
};

/// Deterministic glorot/zero/one initialization; one rng stream in registry
/// order, so a (config, seed) pair fully determines the parameters.
Model init_model(const ModelConfig& config, uint64_t seed);

/// Stable name -> tensor registry (also the checkpoint payload order).
std::vector<NamedParam> named_params(Model& model);
std::vector<NamedParam> named_params(const Model& model);

struct ModelForwardIds {
  Tape::Id logits;
  Tape::Id probs;
};

/// Full taped forward: encoder then classifier head. Returns ids of the
/// 1×num_classes logits and their softmax.
ModelForwardIds taped_model_forward(Tape& tape, LeafMap& leaves, const Model& model,
                                    const std::vector<int>& ids, const std::vector<uint8_t>& mask,
                                    std::vector<std::vector<HeadTraceIds>>* trace_ids = nullptr);

/// Plain forward to a probability vector (1×num_classes).
Matrix model_predict(const Model& model, const EncodedExample& example,
                     std::vector<std::vector<AttentionTrace>>* traces = nullptr);

// ---------------------------------------------------------------------------
// Checkpoint container: 8-byte magic, u32 format version, u64 header length,
// JSON header (config, vocabulary, label names, tensor name/shape list), then
// each tensor as raw little-endian f64 in header order.
// ---------------------------------------------------------------------------

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  std::vector<std::string> label_names;
};

void checkpoint_save(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const std::vector<std::string>& label_names);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace gdt
