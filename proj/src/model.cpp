#include "gdt/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gdt/errors.hpp"

namespace gdt {

void ModelConfig::validate() const {
  encoder.validate();
  if (vocab_size < 2) throw Error("model config: vocab_size must be >= 2");
  if (num_classes < 2) throw Error("model config: num_classes must be >= 2");
}

namespace {

Matrix ones_row(int n) { return Matrix(1, n, 1.0); }

}  // namespace

Model init_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  const int d = config.encoder.d_model;
  const int hd = config.encoder.head_dim();
  const int h = config.hidden();
  SeededRng rng(seed);

  m.content_embedding = glorot_init(config.vocab_size, d, rng);
  m.relpos_embedding = glorot_init(config.encoder.k_max + 1, d, rng);
  m.abs_pos_embedding = glorot_init(config.encoder.max_len, d, rng);

  for (int l = 0; l < config.encoder.num_layers; ++l) {
    EncoderLayerParams layer;
    for (int k = 0; k < config.encoder.num_heads; ++k) {
      AttentionHeadParams head;
      head.w_q_c = glorot_init(hd, hd, rng);
      head.w_k_c = glorot_init(hd, hd, rng);
      head.w_q_p = glorot_init(hd, hd, rng);
      head.w_k_p = glorot_init(hd, hd, rng);
      head.w_v = glorot_init(hd, hd, rng);
      head.w_g = glorot_init(hd, hd, rng);
      layer.heads.push_back(std::move(head));
    }
    layer.w_o = glorot_init(d, d, rng);
    layer.ffn_w1 = glorot_init(d, config.encoder.ffn_size, rng);
    layer.ffn_b1 = Matrix(1, config.encoder.ffn_size);
    layer.ffn_w2 = glorot_init(config.encoder.ffn_size, d, rng);
    layer.ffn_b2 = Matrix(1, d);
    layer.ln1_gain = ones_row(d);
    layer.ln1_bias = Matrix(1, d);
    layer.ln2_gain = ones_row(d);
    layer.ln2_bias = Matrix(1, d);
    m.layers.push_back(std::move(layer));
  }

  m.head.w1 = glorot_init(d, h, rng);
  m.head.b1 = Matrix(1, h);
  m.head.w2 = glorot_init(d, h, rng);
  m.head.b2 = Matrix(1, h);
  m.head.w_q = glorot_init(h, h, rng);
  m.head.w_k = glorot_init(h, h, rng);
  m.head.w_v = glorot_init(h, h, rng);
  m.head.w_r = glorot_init(h, h, rng);
  m.head.b_r = Matrix(1, h);
  m.head.w_m = glorot_init(2 * h, h, rng);
  m.head.b_m = Matrix(1, h);
  m.head.w_out = glorot_init(h, config.num_classes, rng);
  m.head.b_out = Matrix(1, config.num_classes);
  return m;
}

namespace {

template <class M>
void collect_params(M& model, std::vector<NamedParam>& out) {
  auto push = [&out](const std::string& name, const Matrix& m) {
    out.push_back({name, const_cast<Matrix*>(&m)});
  };
  push("embed.content", model.content_embedding);
  push("embed.relpos", model.relpos_embedding);
  push("embed.abspos", model.abs_pos_embedding);
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const std::string lp = "enc." + std::to_string(l) + ".";
    const auto& layer = model.layers[l];
    for (size_t k = 0; k < layer.heads.size(); ++k) {
      const std::string hp = lp + "head." + std::to_string(k) + ".";
      const auto& head = layer.heads[k];
      push(hp + "w_q_c", head.w_q_c);
      push(hp + "w_k_c", head.w_k_c);
      push(hp + "w_q_p", head.w_q_p);
      push(hp + "w_k_p", head.w_k_p);
      push(hp + "w_v", head.w_v);
      push(hp + "w_g", head.w_g);
    }
    push(lp + "w_o", layer.w_o);
    push(lp + "ffn.w1", layer.ffn_w1);
    push(lp + "ffn.b1", layer.ffn_b1);
    push(lp + "ffn.w2", layer.ffn_w2);
    push(lp + "ffn.b2", layer.ffn_b2);
    push(lp + "ln1.gain", layer.ln1_gain);
    push(lp + "ln1.bias", layer.ln1_bias);
    push(lp + "ln2.gain", layer.ln2_gain);
    push(lp + "ln2.bias", layer.ln2_bias);
  }
  const auto& head = model.head;
  push("abfnn.w1", head.w1);
  push("abfnn.b1", head.b1);
  push("abfnn.w2", head.w2);
  push("abfnn.b2", head.b2);
  push("abfnn.w_q", head.w_q);
  push("abfnn.w_k", head.w_k);
  push("abfnn.w_v", head.w_v);
  push("abfnn.w_r", head.w_r);
  push("abfnn.b_r", head.b_r);
  push("abfnn.w_m", head.w_m);
  push("abfnn.b_m", head.b_m);
  push("abfnn.w_out", head.w_out);
  push("abfnn.b_out", head.b_out);
}

}  // namespace

std::vector<NamedParam> named_params(Model& model) {
  std::vector<NamedParam> out;
  collect_params(model, out);
  return out;
}

std::vector<NamedParam> named_params(const Model& model) {
  std::vector<NamedParam> out;
  collect_params(model, out);
  return out;
}

ModelForwardIds taped_model_forward(Tape& tape, LeafMap& leaves, const Model& model,
                                    const std::vector<int>& ids, const std::vector<uint8_t>& mask,
                                    std::vector<std::vector<HeadTraceIds>>* trace_ids) {
  Tape::Id encoded =
      taped_encoder_forward(tape, leaves, ids, mask, model.content_embedding,
                            model.relpos_embedding, model.abs_pos_embedding, model.layers,
                            model.config.encoder, trace_ids);
  AbfnnParamIds head_ids = leaf_abfnn_params(tape, leaves, model.head);
  ModelForwardIds out;
  out.logits = taped_abfnn_logits(tape, encoded, mask, head_ids);
  out.probs = tape.softmax_rows_masked(out.logits, {});
  return out;
}

Matrix model_predict(const Model& model, const EncodedExample& example,
                     std::vector<std::vector<AttentionTrace>>* traces) {
  Tape tape;
  LeafMap leaves;
  std::vector<std::vector<HeadTraceIds>> trace_ids;
  ModelForwardIds fwd = taped_model_forward(tape, leaves, model, example.ids, example.mask(),
                                            traces ? &trace_ids : nullptr);
  if (traces) {
    traces->clear();
    for (const auto& layer : trace_ids) {
      std::vector<AttentionTrace> layer_traces;
      for (const auto& head : layer) layer_traces.push_back(extract_trace(tape, head));
      traces->push_back(std::move(layer_traces));
    }
  }
  return tape.value(fwd.probs);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'D', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kFormatVersion = 1;

void write_u32le(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64le(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated checkpoint");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64le(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError(path + ": truncated checkpoint");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64le(std::ostream& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64le(out, bits);
}

double read_f64le(std::istream& in, const std::string& path) {
  uint64_t bits = read_u64le(in, path);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void checkpoint_save(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const std::vector<std::string>& label_names) {
  std::vector<NamedParam> params = named_params(model);

  nlohmann::json header;
  header["config"] = {
      {"num_layers", model.config.encoder.num_layers},
      {"d_model", model.config.encoder.d_model},
      {"num_heads", model.config.encoder.num_heads},
      {"ffn_size", model.config.encoder.ffn_size},
      {"k_max", model.config.encoder.k_max},
      {"max_len", model.config.encoder.max_len},
      {"variant", variant_name(model.config.encoder.variant)},
      {"literal_scaling", model.config.encoder.literal_scaling},
      {"vocab_size", model.config.vocab_size},
      {"num_classes", model.config.num_classes},
      {"abfnn_hidden", model.config.abfnn_hidden},
  };
  header["vocab"] = vocab.id_to_token;
  header["labels"] = label_names;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params)
    tensors.push_back({{"name", p.name}, {"rows", p.tensor->rows}, {"cols", p.tensor->cols}});
  header["tensors"] = tensors;

  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(kMagic, 8);
  write_u32le(out, kFormatVersion);
  write_u64le(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& p : params)
    for (double v : p.tensor->data) write_f64le(out, v);
  if (!out) throw FormatError(path + ": write failed");
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");

  char magic[8];
  if (!in.read(magic, 8)) throw FormatError(path + ": truncated checkpoint");
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  const uint32_t version = read_u32le(in, path);
  if (version != kFormatVersion)
    throw FormatError(path + ": unsupported checkpoint format version " +
                      std::to_string(version));

  const uint64_t header_len = read_u64le(in, path);
  std::string header_str(header_len, '\0');
  if (!in.read(header_str.data(), static_cast<std::streamsize>(header_len)))
    throw FormatError(path + ": truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    const auto& cfg = header.at("config");
    ModelConfig config;
    config.encoder.num_layers = cfg.at("num_layers").get<int>();
    config.encoder.d_model = cfg.at("d_model").get<int>();
    config.encoder.num_heads = cfg.at("num_heads").get<int>();
    config.encoder.ffn_size = cfg.at("ffn_size").get<int>();
    config.encoder.k_max = cfg.at("k_max").get<int>();
    config.encoder.max_len = cfg.at("max_len").get<int>();
    auto variant = variant_from_name(cfg.at("variant").get<std::string>());
    if (!variant) throw FormatError(path + ": unknown attention variant in header");
    config.encoder.variant = *variant;
    config.encoder.literal_scaling = cfg.at("literal_scaling").get<bool>();
    config.vocab_size = cfg.at("vocab_size").get<int>();
    config.num_classes = cfg.at("num_classes").get<int>();
    config.abfnn_hidden = cfg.at("abfnn_hidden").get<int>();

    ckpt.model = init_model(config, 0);
    ckpt.vocab.id_to_token = header.at("vocab").get<std::vector<std::string>>();
    for (size_t i = 2; i < ckpt.vocab.id_to_token.size(); ++i)
      ckpt.vocab.token_to_id[ckpt.vocab.id_to_token[i]] = static_cast<int>(i);
    ckpt.label_names = header.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }

  std::vector<NamedParam> params = named_params(ckpt.model);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size())
    throw FormatError(path + ": header lists " + std::to_string(tensors.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string name = tensors[i].at("name").get<std::string>();
    const int rows = tensors[i].at("rows").get<int>();
    const int cols = tensors[i].at("cols").get<int>();
    if (name != params[i].name)
      throw FormatError(path + ": tensor order mismatch, expected `" + params[i].name +
                        "`, found `" + name + "`");
    if (rows != params[i].tensor->rows || cols != params[i].tensor->cols)
      throw ShapeError(path + ": tensor `" + name + "` has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", config requires " +
                       params[i].tensor->shape_str());
    for (double& v : params[i].tensor->data) v = read_f64le(in, path);
  }
  return ckpt;
}

}  // namespace gdt
