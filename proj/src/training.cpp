#include "gdt/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gdt/errors.hpp"

namespace gdt {

void TrainConfig::validate() const {
  // learning_rate 0 is allowed: a no-op run is a useful identity check
  if (learning_rate < 0.0) throw Error("train config: learning_rate must be >= 0");
  if (epochs < 1) throw Error("train config: epochs must be >= 1");
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
}

double cross_entropy_loss(const Matrix& probs, int true_class) {
  if (probs.rows != 1)
    throw ShapeError("cross_entropy_loss: probs must be 1xK, got " + probs.shape_str());
  if (true_class < 0 || true_class >= probs.cols)
    throw Error("cross_entropy_loss: class " + std::to_string(true_class) +
                " out of range [0, " + std::to_string(probs.cols) + ")");
  return -std::log(std::max(probs(0, true_class), 1e-12));
}

namespace {

int argmax_row(const Matrix& probs) {
  int best = 0;
  for (int j = 1; j < probs.cols; ++j)
    if (probs(0, j) > probs(0, best)) best = j;
  return best;
}

struct ExampleResult {
  std::vector<Matrix> grads;
  double loss = 0.0;
  bool correct = false;
};

}  // namespace

BatchResult gradients(const Model& model, const std::vector<EncodedExample>& batch) {
  if (batch.empty()) throw Error("gradients: empty batch");
  const std::vector<NamedParam> params = named_params(model);
  const size_t num_params = params.size();
  const int batch_n = static_cast<int>(batch.size());

  std::vector<ExampleResult> per_example(batch_n);
#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < batch_n; ++e) {
    const EncodedExample& ex = batch[e];
    Tape tape;
    LeafMap leaves;
    // register every parameter up front so leaf ids align with the registry
    std::vector<Tape::Id> leaf_ids(num_params);
    for (size_t p = 0; p < num_params; ++p) leaf_ids[p] = leaves.get(tape, *params[p].tensor);

    ModelForwardIds fwd = taped_model_forward(tape, leaves, model, ex.ids, ex.mask());
    Tape::Id loss = tape.cross_entropy_logits(fwd.logits, ex.label);
    tape.backward(loss, 1.0 / batch_n);

    ExampleResult& res = per_example[e];
    res.loss = tape.value(loss)(0, 0);
    res.correct = argmax_row(tape.value(fwd.probs)) == ex.label;
    res.grads.reserve(num_params);
    for (size_t p = 0; p < num_params; ++p) res.grads.push_back(tape.grad(leaf_ids[p]));
  }

  BatchResult out;
  out.grads.reserve(num_params);
  for (size_t p = 0; p < num_params; ++p)
    out.grads.emplace_back(params[p].tensor->rows, params[p].tensor->cols);
  // fixed example-order reduction keeps results independent of thread count
  for (int e = 0; e < batch_n; ++e) {
    for (size_t p = 0; p < num_params; ++p) {
      Matrix& dst = out.grads[p];
      const Matrix& src = per_example[e].grads[p];
      for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    }
    out.mean_loss += per_example[e].loss;
    if (per_example[e].correct) ++out.correct;
  }
  out.mean_loss /= batch_n;
  return out;
}

double batch_mean_loss(const Model& model, const std::vector<EncodedExample>& batch) {
  if (batch.empty()) throw Error("batch_mean_loss: empty batch");
  const int batch_n = static_cast<int>(batch.size());
  std::vector<double> losses(batch_n);
#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < batch_n; ++e) {
    Tape tape;
    LeafMap leaves;
    ModelForwardIds fwd = taped_model_forward(tape, leaves, model, batch[e].ids, batch[e].mask());
    losses[e] = tape.value(tape.cross_entropy_logits(fwd.logits, batch[e].label))(0, 0);
  }
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / batch_n;
}

GradCheckReport finite_diff_check(Model& model, const std::vector<EncodedExample>& batch,
                                  double epsilon, double threshold, int sample_cap,
                                  uint64_t sample_seed) {
  GradCheckReport report;
  report.threshold = threshold;

  const BatchResult analytic = gradients(model, batch);
  std::vector<NamedParam> params = named_params(model);

  for (size_t p = 0; p < params.size(); ++p) {
    Matrix& tensor = *params[p].tensor;
    const Matrix& grad = analytic.grads[p];
    const size_t total = tensor.data.size();

    std::vector<size_t> coords;
    if (static_cast<int>(total) <= sample_cap) {
      coords.resize(total);
      for (size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
      SeededRng rng(sample_seed + p);
      for (int i = 0; i < sample_cap; ++i) coords.push_back(rng.uniform_int(total));
    }

    double tensor_max = 0.0;
    for (size_t c : coords) {
      const double saved = tensor.data[c];
      tensor.data[c] = saved + epsilon;
      const double loss_plus = batch_mean_loss(model, batch);
      tensor.data[c] = saved - epsilon;
      const double loss_minus = batch_mean_loss(model, batch);
      tensor.data[c] = saved;

      const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
      const double a = grad.data[c];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
      tensor_max = std::max(tensor_max, rel);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[p].name;
      }
    }
    report.per_param.emplace_back(params[p].name, tensor_max);
  }
  report.pass = report.max_rel_error < threshold;
  return report;
}

namespace {

struct AdamState {
  std::vector<Matrix> m, v;
  int64_t t = 0;
};

void sgd_step(std::vector<NamedParam>& params, const std::vector<Matrix>& grads, double lr) {
  for (size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p].tensor;
    const Matrix& g = grads[p];
    for (size_t i = 0; i < w.data.size(); ++i) w.data[i] -= lr * g.data[i];
  }
}

void adam_step(std::vector<NamedParam>& params, const std::vector<Matrix>& grads,
               const TrainConfig& cfg, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor->rows, p.tensor->cols);
      state.v.emplace_back(p.tensor->rows, p.tensor->cols);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p].tensor;
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    const Matrix& g = grads[p];
    for (size_t i = 0; i < w.data.size(); ++i) {
      m.data[i] = cfg.adam_beta1 * m.data[i] + (1.0 - cfg.adam_beta1) * g.data[i];
      v.data[i] = cfg.adam_beta2 * v.data[i] + (1.0 - cfg.adam_beta2) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      w.data[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

}  // namespace

TrainLog train(Model& model, const std::vector<EncodedExample>& train_set,
               const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error("train: empty dataset");

  std::vector<NamedParam> params = named_params(model);
  AdamState adam;
  SeededRng rng(config.seed);
  TrainLog log;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<EncodedExample> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

      BatchResult result = gradients(model, batch);
      if (!std::isfinite(result.mean_loss))
        throw Error("train: loss diverged (not finite) at epoch " + std::to_string(epoch));
      loss_sum += result.mean_loss;
      ++batches;

      if (config.optimizer == OptimizerKind::SGD)
        sgd_step(params, result.grads, config.learning_rate);
      else
        adam_step(params, result.grads, config, adam);
    }

    // accuracy on the full training set with the epoch's final parameters
    std::vector<int> predictions = predict_classes(model, train_set);
    int correct = 0;
    for (size_t i = 0; i < train_set.size(); ++i)
      if (predictions[i] == train_set[i].label) ++correct;

    EpochStat stat;
    stat.epoch = epoch;
    stat.loss = loss_sum / batches;
    stat.accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    log.push_back(stat);
  }
  return log;
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "epoch,loss,accuracy\n";
  char buf[96];
  for (const auto& stat : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", stat.epoch, stat.loss, stat.accuracy);
    out << buf;
  }
}

std::vector<int> predict_classes(const Model& model, const std::vector<EncodedExample>& examples,
                                 std::vector<std::vector<double>>* class_scores) {
  const int n = static_cast<int>(examples.size());
  std::vector<int> predictions(n);
  if (class_scores) class_scores->assign(n, {});
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    Matrix probs = model_predict(model, examples[i]);
    predictions[i] = argmax_row(probs);
    if (class_scores) (*class_scores)[i] = probs.data;
  }
  return predictions;
}

std::vector<EncodedExample> generate_synthetic(const SyntheticTaskSpec& spec) {
  if (spec.num_classes != 2)
    throw Error("generate_synthetic: both task kinds are binary (num_classes must be 2)");
  if (spec.seq_len < 2 && spec.kind == SyntheticTask::OrderSensitive)
    throw Error("generate_synthetic: OrderSensitive needs seq_len >= 2");
  if (spec.vocab_size < 5) throw Error("generate_synthetic: vocab_size must be >= 5");

  // ids 0/1 are reserved (PAD/UNK); 2 and 3 are the designated tokens;
  // fillers come from [4, vocab_size)
  constexpr int kTokenA = 2;
  constexpr int kTokenB = 3;
  const int filler_lo = 4;

  SeededRng rng(spec.seed);
  std::vector<EncodedExample> out;
  out.reserve(spec.num_examples);
  for (int e = 0; e < spec.num_examples; ++e) {
    EncodedExample ex;
    ex.ids.assign(spec.seq_len, 0);
    ex.length = spec.seq_len;
    const int cls = e % 2;  // balanced within one
    for (int i = 0; i < spec.seq_len; ++i)
      ex.ids[i] = filler_lo + static_cast<int>(rng.uniform_int(spec.vocab_size - filler_lo));

    if (spec.kind == SyntheticTask::BagOfTokens) {
      if (cls == 1) ex.ids[rng.uniform_int(spec.seq_len)] = kTokenA;
      ex.label = cls;
    } else {
      // both designated tokens occur exactly once; class by their order
      size_t first = rng.uniform_int(spec.seq_len);
      size_t second = rng.uniform_int(spec.seq_len - 1);
      if (second >= first) ++second;
      const size_t lo = std::min(first, second);
      const size_t hi = std::max(first, second);
      if (cls == 0) {
        ex.ids[lo] = kTokenA;
        ex.ids[hi] = kTokenB;
      } else {
        ex.ids[lo] = kTokenB;
        ex.ids[hi] = kTokenA;
      }
      ex.label = cls;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace gdt
