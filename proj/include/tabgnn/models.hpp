#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tabgnn/error.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/random.hpp"
#include "tabgnn/tensor.hpp"

namespace tabgnn {

enum class HeadMerge { concat, average };

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;  // per head
  Activation activation = Activation::identity();
  int heads = 1;
  HeadMerge merge = HeadMerge::concat;

  int output_dim() const { return merge == HeadMerge::concat ? heads * out_dim : out_dim; }
};

// Graph-derived operands for one forward pass: a propagation matrix for
// convolution layers and a binary neighbourhood mask for attention layers.
struct GraphContext {
  Matrix propagation;
  Matrix mask;
};

inline GraphContext make_graph_context(const AdjacencyMatrix& a, Normalization normalization) {
  return GraphContext{normalize(a, normalization).weights, binarize(a).weights};
}

// Row-wise argmax; ties go to the lowest class index.
inline std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index r = 0; r < logits.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Functional forwards

// H <- act(P * H * W) per layer; the final layer is linear.
inline Var gcn_forward(Tape& tape, const Matrix& propagation, const Matrix& features, std::span<Parameter> layers,
                       Activation hidden_activation = Activation::relu()) {
  if (propagation.rows() != features.rows() || propagation.cols() != features.rows()) {
    throw ShapeError("gcn_forward: propagation " + shape_str(propagation) + " for " +
                     std::to_string(features.rows()) + " nodes");
  }
  const Var p = tape.constant(propagation);
  Var h = tape.constant(features);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (h.cols() != layers[l].value.rows()) throw ShapeError("gcn_forward: layer " + std::to_string(l) + " shape");
    h = matmul(p, matmul(h, tape.param(layers[l])));
    if (l + 1 < layers.size()) h = activate(h, hidden_activation);
  }
  return h;
}

// Attention coefficients of one head: e_pq = leaky_relu(a . [Wh_p || Wh_q])
// for neighbours q of p (mask != 0, self-loop included), softmax over each
// neighbourhood. `projected` is H W; `attention` is the 2d' x 1 vector a.
inline Var gat_attention(Var projected, Var attention, const Matrix& mask, double slope = 0.2) {
  const Index width = projected.cols();
  if (attention.rows() != 2 * width || attention.cols() != 1) {
    throw ShapeError("gat_attention: attention vector " + shape_str(attention.value()) + " for width " +
                     std::to_string(width));
  }
  const Var source = matmul(projected, slice_rows(attention, 0, width));
  const Var target = matmul(projected, slice_rows(attention, width, width));
  const Var scores = activate(outer_sum(source, target), Activation::leaky_relu(slope));
  return softmax_rows(scores, mask);
}

struct AttentionHead {
  Parameter weight;     // in_dim x out_dim
  Parameter attention;  // 2 out_dim x 1
};

struct AttentionLayer {
  LayerSpec spec;
  std::vector<AttentionHead> heads;
};

inline AttentionLayer make_attention_layer(const LayerSpec& spec, const std::string& prefix, Rng& rng) {
  if (spec.in_dim <= 0 || spec.out_dim <= 0 || spec.heads <= 0) throw UsageError("invalid attention layer spec");
  AttentionLayer layer{spec, {}};
  for (int h = 0; h < spec.heads; ++h) {
    const std::string name = prefix + ".head" + std::to_string(h);
    Matrix w = glorot_uniform(spec.in_dim, spec.out_dim, rng);
    Matrix a = glorot_uniform(2 * spec.out_dim, 1, rng);
    layer.heads.push_back(AttentionHead{Parameter(name + ".weight", std::move(w)),
                                        Parameter(name + ".attention", std::move(a))});
  }
  return layer;
}

// h'_p = act(sum_q alpha_pq W h_q) per head; heads concatenated or averaged
// (activation applied after averaging).
inline Var attention_layer_forward(Tape& tape, Var input, const Matrix& mask, AttentionLayer& layer) {
  if (input.cols() != layer.spec.in_dim) throw ShapeError("attention layer: input width mismatch");
  std::vector<Var> outputs;
  for (auto& head : layer.heads) {
    const Var projected = matmul(input, tape.param(head.weight));
    const Var alpha = gat_attention(projected, tape.param(head.attention), mask);
    outputs.push_back(matmul(alpha, projected));
  }
  if (layer.spec.merge == HeadMerge::concat) {
    for (Var& o : outputs) o = activate(o, layer.spec.activation);
    return outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
  }
  Var total = outputs.front();
  for (std::size_t i = 1; i < outputs.size(); ++i) total = add(total, outputs[i]);
  if (outputs.size() > 1) total = scale(total, 1.0 / static_cast<double>(outputs.size()));
  return activate(total, layer.spec.activation);
}

// ---------------------------------------------------------------------------
// Trainable models

// Common surface for supervised classifiers. Graph models receive a
// GraphContext; feature-only models get nullptr.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual bool uses_graph() const = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual Var forward(Tape& tape, const Matrix& features, const GraphContext* graph) = 0;

  // Regularization term added to the mean training loss over `rows` samples.
  virtual std::optional<Var> penalty(Tape& /*tape*/, Index /*rows*/) { return std::nullopt; }

  virtual GraphContext prepare_graph(const AdjacencyMatrix& a) const {
    return make_graph_context(a, Normalization::row_mean);
  }

  Matrix logits(const Matrix& features, const GraphContext* graph) {
    Tape tape;
    return forward(tape, features, graph).value();
  }
};

struct GCNConfig {
  std::vector<int> hidden{64};
  Activation activation = Activation::relu();
  Normalization normalization = Normalization::symmetric;
};

class GCN final : public Model {
 public:
  GCN(int in_dim, int classes, const GCNConfig& config, std::uint64_t seed) : config_(config) {
    Rng rng(derive_seed(seed, 0x47434eULL));
    int width = in_dim;
    std::vector<int> dims = config.hidden;
    dims.push_back(classes);
    for (std::size_t l = 0; l < dims.size(); ++l) {
      layers_.emplace_back("gcn.layer" + std::to_string(l) + ".weight", glorot_uniform(width, dims[l], rng));
      width = dims[l];
    }
  }

  std::string kind() const override { return "gcn"; }
  bool uses_graph() const override { return true; }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (auto& p : layers_) out.push_back(&p);
    return out;
  }

  GraphContext prepare_graph(const AdjacencyMatrix& a) const override {
    return make_graph_context(a, config_.normalization);
  }

  Var forward(Tape& tape, const Matrix& features, const GraphContext* graph) override {
    if (graph == nullptr) throw UsageError("gcn requires a graph");
    return gcn_forward(tape, graph->propagation, features, layers_, config_.activation);
  }

  std::vector<Parameter>& layers() { return layers_; }

 private:
  GCNConfig config_;
  std::vector<Parameter> layers_;
};

struct GATConfig {
  std::vector<int> hidden{64};  // total width of each hidden layer across heads
  int heads = 4;
  int output_heads = 1;
  Activation activation = Activation::elu();
};

class GAT final : public Model {
 public:
  GAT(int in_dim, int classes, const GATConfig& config, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x474154ULL));
    int width = in_dim;
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
      if (config.hidden[l] % config.heads != 0) throw UsageError("GAT hidden width must be divisible by heads");
      const LayerSpec spec{width, config.hidden[l] / config.heads, config.activation, config.heads, HeadMerge::concat};
      layers_.push_back(make_attention_layer(spec, "gat.layer" + std::to_string(l), rng));
      width = spec.output_dim();
    }
    const LayerSpec out{width, classes, Activation::identity(), config.output_heads, HeadMerge::average};
    layers_.push_back(make_attention_layer(out, "gat.layer" + std::to_string(config.hidden.size()), rng));
  }

  std::string kind() const override { return "gat"; }
  bool uses_graph() const override { return true; }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
      for (auto& head : layer.heads) {
        out.push_back(&head.weight);
        out.push_back(&head.attention);
      }
    }
    return out;
  }

  Var forward(Tape& tape, const Matrix& features, const GraphContext* graph) override {
    if (graph == nullptr) throw UsageError("gat requires a graph");
    if (graph->mask.rows() != features.rows()) throw ShapeError("gat: mask size does not match node count");
    Var h = tape.constant(features);
    for (auto& layer : layers_) h = attention_layer_forward(tape, h, graph->mask, layer);
    return h;
  }

  std::vector<AttentionLayer>& layers() { return layers_; }

 private:
  std::vector<AttentionLayer> layers_;
};

struct MLPConfig {
  std::vector<int> hidden{256, 128, 64};
  Activation activation = Activation::relu();
};

class MLP final : public Model {
 public:
  MLP(int in_dim, int classes, const MLPConfig& config, std::uint64_t seed) : activation_(config.activation) {
    Rng rng(derive_seed(seed, 0x4d4c50ULL));
    int width = in_dim;
    std::vector<int> dims = config.hidden;
    dims.push_back(classes);
    for (std::size_t l = 0; l < dims.size(); ++l) {
      const std::string prefix = "mlp.layer" + std::to_string(l);
      weights_.emplace_back(prefix + ".weight", glorot_uniform(width, dims[l], rng));
      biases_.emplace_back(prefix + ".bias", Matrix::Zero(1, dims[l]));
      width = dims[l];
    }
  }

  std::string kind() const override { return "mlp"; }
  bool uses_graph() const override { return false; }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back(&weights_[l]);
      out.push_back(&biases_[l]);
    }
    return out;
  }

  Var forward(Tape& tape, const Matrix& features, const GraphContext*) override {
    Var h = tape.constant(features);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = add_row(matmul(h, tape.param(weights_[l])), tape.param(biases_[l]));
      if (l + 1 < weights_.size()) h = activate(h, activation_);
    }
    return h;
  }

 private:
  Activation activation_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

enum class Penalty { l1, l2 };

inline std::string to_string(Penalty p) { return p == Penalty::l1 ? "l1" : "l2"; }

inline Penalty parse_penalty(const std::string& s) {
  if (s == "l1" || s == "L1") return Penalty::l1;
  if (s == "l2" || s == "L2") return Penalty::l2;
  throw UsageError("unknown penalty '" + s + "'");
}

struct LRConfig {
  Penalty penalty = Penalty::l2;
  double inverse_strength = 1.0;  // C
};

// Multinomial logistic regression: logits = X W + b. The training objective
// is mean cross-entropy + R(W) / n with R = ||W||_1 / C or ||W||_2^2 / (2C),
// i.e. the summed-loss objective sum_i CE_i + R(W) divided by n.
class LogisticRegression final : public Model {
 public:
  LogisticRegression(int in_dim, int classes, const LRConfig& config, std::uint64_t seed)
      : config_(config) {
    if (!(config.inverse_strength > 0.0)) throw UsageError("LR inverse regularization strength must be positive");
    Rng rng(derive_seed(seed, 0x4c52ULL));
    weight_ = Parameter("lr.weight", glorot_uniform(in_dim, classes, rng));
    bias_ = Parameter("lr.bias", Matrix::Zero(1, classes));
  }

  std::string kind() const override { return "lr"; }
  bool uses_graph() const override { return false; }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  Var forward(Tape& tape, const Matrix& features, const GraphContext*) override {
    return add_row(matmul(tape.constant(features), tape.param(weight_)), tape.param(bias_));
  }

  std::optional<Var> penalty(Tape& tape, Index rows) override {
    const Var w = tape.param(weight_);
    const double n = static_cast<double>(std::max<Index>(rows, 1));
    if (config_.penalty == Penalty::l1) return scale(abs_sum(w), 1.0 / (config_.inverse_strength * n));
    return scale(squared_sum(w), 1.0 / (2.0 * config_.inverse_strength * n));
  }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  LRConfig config_;
  Parameter weight_;
  Parameter bias_;
};

// ---------------------------------------------------------------------------
// Graph attention autoencoder

struct GATEConfig {
  std::vector<int> encoder{64, 32};  // last entry is the embedding width
  Activation activation = Activation::elu();
  double structure_weight = 1.0;  // lambda in the loss
};

struct GateOutput {
  Var embedding;
  Var reconstruction;
};

// Encoder d -> ... -> embedding and mirrored decoder back to d, all single-head
// attention layers. Hidden layers use the configured activation; the
// embedding and reconstruction layers are linear.
class GATE {
 public:
  GATE(int in_dim, const GATEConfig& config, std::uint64_t seed) : config_(config) {
    if (config.encoder.empty()) throw UsageError("GATE needs at least one encoder layer");
    Rng rng(derive_seed(seed, 0x47415445ULL));
    std::vector<int> dims{in_dim};
    dims.insert(dims.end(), config.encoder.begin(), config.encoder.end());
    const std::size_t depth = config.encoder.size();
    for (std::size_t l = 0; l < depth; ++l) {
      const bool last = l + 1 == depth;
      const LayerSpec spec{dims[l], dims[l + 1], last ? Activation::identity() : config.activation, 1,
                           HeadMerge::concat};
      encoder_.push_back(make_attention_layer(spec, "gate.encoder" + std::to_string(l), rng));
    }
    for (std::size_t l = 0; l < depth; ++l) {
      const bool last = l + 1 == depth;
      const LayerSpec spec{dims[depth - l], dims[depth - l - 1], last ? Activation::identity() : config.activation,
                           1, HeadMerge::concat};
      decoder_.push_back(make_attention_layer(spec, "gate.decoder" + std::to_string(l), rng));
    }
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto* stack : {&encoder_, &decoder_}) {
      for (auto& layer : *stack) {
        for (auto& head : layer.heads) {
          out.push_back(&head.weight);
          out.push_back(&head.attention);
        }
      }
    }
    return out;
  }

  int embedding_dim() const { return config_.encoder.back(); }
  const GATEConfig& config() const { return config_; }
  std::vector<AttentionLayer>& encoder() { return encoder_; }
  std::vector<AttentionLayer>& decoder() { return decoder_; }

  GateOutput forward(Tape& tape, const Matrix& features, const Matrix& mask) {
    Var h = tape.constant(features);
    for (auto& layer : encoder_) h = attention_layer_forward(tape, h, mask, layer);
    const Var z = h;
    for (auto& layer : decoder_) h = attention_layer_forward(tape, h, mask, layer);
    return {z, h};
  }

  Matrix embed(const Matrix& features, const AdjacencyMatrix& a) {
    Tape tape;
    const Matrix mask = binarize(a).weights;
    Var h = tape.constant(features);
    for (auto& layer : encoder_) h = attention_layer_forward(tape, h, mask, layer);
    return h.value();
  }

 private:
  GATEConfig config_;
  std::vector<AttentionLayer> encoder_;
  std::vector<AttentionLayer> decoder_;
};

// mse(X_hat, X) - lambda * mean_{(p,q) edge, p != q} log sigmoid(z_p . z_q);
// the structure term is 0 when the graph has no off-diagonal edge.
inline Var gate_loss(const Matrix& features, Var reconstruction, Var embedding, const Matrix& adjacency,
                     double structure_weight) {
  const Var recon = mse(reconstruction, features);
  if (structure_weight == 0.0) return recon;
  Matrix edges = (adjacency.array() != 0.0).cast<double>().matrix();
  edges.diagonal().setZero();
  const Var affinity = log_sigmoid(matmul(embedding, transpose(embedding)));
  return sub(recon, scale(masked_mean(affinity, edges), structure_weight));
}

// ---------------------------------------------------------------------------
// Parameter snapshots

inline std::vector<Matrix> snapshot(std::span<Parameter* const> params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

inline void restore(std::span<Parameter* const> params, const std::vector<Matrix>& values) {
  if (values.size() != params.size()) throw Error("restore: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace tabgnn
