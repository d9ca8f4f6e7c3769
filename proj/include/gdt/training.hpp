#pragma once

#include <string>
#include <vector>

#include "gdt/model.hpp"

namespace gdt {

enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1;
  int batch_size = 16;
  uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// -ln(probs[true_class]), with the probability clamped to >= 1e-12.
double cross_entropy_loss(const Matrix& probs, int true_class);

struct BatchResult {
  std::vector<Matrix> grads;  // aligned with named_params order, mean over batch
  double mean_loss = 0.0;
  int correct = 0;
};

/// Gradients of the mean batch loss for every parameter. Examples are
/// processed on independent tapes (in parallel) and reduced in fixed example
/// order, so the result does not depend on thread count.
BatchResult gradients(const Model& model, const std::vector<EncodedExample>& batch);

/// Mean loss only (no backward); used by the finite-difference check.
double batch_mean_loss(const Model& model, const std::vector<EncodedExample>& batch);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::string worst_param;
  bool pass = false;
  std::vector<std::pair<std::string, double>> per_param;  // max rel error per tensor
};

/// Central-difference verification of `gradients` on a tiny model; at most
/// sample_cap coordinates per tensor are probed (seeded subsample).
/// rel error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
GradCheckReport finite_diff_check(Model& model, const std::vector<EncodedExample>& batch,
                                  double epsilon = 1e-5, double threshold = 1e-4,
                                  int sample_cap = 500, uint64_t sample_seed = 42);

struct EpochStat {
  int epoch = 0;       // 1-based
  double loss = 0.0;   // mean loss over the epoch's batches
  double accuracy = 0.0;  // full-train-set accuracy after the epoch's updates
};

using TrainLog = std::vector<EpochStat>;

/// Seeded-shuffle minibatch loop; aborts with a diagnostic naming the epoch if
/// the loss stops being finite.
TrainLog train(Model& model, const std::vector<EncodedExample>& train_set,
               const TrainConfig& config);

void write_train_log_csv(const std::string& path, const TrainLog& log);

/// Predicted class (argmax, lowest index on ties) for each example.
std::vector<int> predict_classes(const Model& model, const std::vector<EncodedExample>& examples,
                                 std::vector<std::vector<double>>* class_scores = nullptr);

enum class SyntheticTask { BagOfTokens, OrderSensitive };

struct SyntheticTaskSpec {
  int vocab_size = 20;
  int seq_len = 8;
  int num_classes = 2;
  int num_examples = 400;
  uint64_t seed = 42;
  SyntheticTask kind = SyntheticTask::OrderSensitive;
};

/// Deterministic synthetic datasets with balanced classes (within one).
/// BagOfTokens: class 1 iff a designated token occurs. OrderSensitive: class 0
/// iff token A occurs before token B (both always present exactly once).
std::vector<EncodedExample> generate_synthetic(const SyntheticTaskSpec& spec);

}  // namespace gdt
