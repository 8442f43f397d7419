#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tabgnn/dataset.hpp"
#include "tabgnn/error.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/models.hpp"
#include "tabgnn/random.hpp"
#include "tabgnn/tensor.hpp"

namespace tabgnn {

enum class Optimizer { adam, sgd };

inline std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw UsageError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
  int max_epochs = 1000;
  int patience = 100;
  double learning_rate = 0.001;
  int batch_size = 64;  // feature-only models; graph models train full-batch
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;

  void validate() const {
    if (max_epochs < 1) throw UsageError("max_epochs must be positive");
    if (patience < 1 || patience > max_epochs) throw UsageError("patience must be in [1, max_epochs]");
    if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
    if (batch_size < 1) throw UsageError("batch_size must be positive");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();  // NaN when not monitored
};

struct TrainResult {
  std::vector<Matrix> best_params;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
  // Graph models: table rows making up the training graph, in node order.
  IndexList graph_rows;
  std::optional<SimilarityConfig> graph_config;
  // Predictions for the validation rows at the best parameters.
  std::vector<int> validation_predictions;

  int epochs_ran() const { return static_cast<int>(history.size()); }
};

inline void write_history_csv(std::ostream& out, const TrainResult& r) {
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (const auto& e : r.history) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (!std::isnan(e.val_loss)) out << e.val_loss;
    out << '\n';
  }
}

// Tracks the minimum of a monitored loss. update() reports whether the epoch
// is a new best; should_stop() becomes true after `patience` consecutive
// epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool update(double loss, int epoch) {
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int stale_ = 0;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update from the gradients stored in the parameters.
inline void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& opt = {}) {
  if (state.first.empty()) {
    for (const Parameter* p : params) {
      state.first.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first.size() != params.size()) throw Error("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) throw Error("adam_step: state shape mismatch");
    m = opt.beta1 * m + (1.0 - opt.beta1) * p.grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= opt.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
  }
}

inline void sgd_step(std::span<Parameter* const> params, double learning_rate) {
  for (Parameter* p : params) p->value -= learning_rate * p->grad;
}

namespace detail {

class Stepper {
 public:
  explicit Stepper(const TrainConfig& config) : config_(config) {}

  void step(std::span<Parameter* const> params) {
    if (config_.optimizer == Optimizer::adam) {
      adam_step(params, state_, AdamOptions{config_.learning_rate});
    } else {
      sgd_step(params, config_.learning_rate);
    }
  }

 private:
  TrainConfig config_;
  AdamState state_;
};

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

inline Var supervised_objective(Model& model, Tape& tape, Var logits, std::span<const int> labels) {
  Var loss = cross_entropy(logits, labels);
  if (auto pen = model.penalty(tape, static_cast<Index>(labels.size()))) loss = add(loss, *pen);
  return loss;
}

inline void require_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) throw TrainingFailure(epoch, "non-finite loss");
}

}  // namespace detail

// Supervised training with early stopping on validation loss.
//
// Graph models: the training graph is built over train + validation rows only
// (test rows never enter it); the loss uses train rows, validation rows only
// take part in message passing and in the monitored loss. Full-batch; the
// losses recorded for epoch e are those of the parameters before that epoch's
// update. Feature-only models: mini-batches over shuffled train rows, with the
// validation loss evaluated after each epoch.
//
// The model is left holding the best parameters.
inline TrainResult train_supervised(Model& model, const DataTable& table, const SplitIndices& split,
                                    const TrainConfig& config, std::optional<SimilarityConfig> graph = std::nullopt) {
  config.validate();
  if (split.train.empty() || split.validation.empty()) throw UsageError("train and validation sets must be non-empty");
  const auto params = model.parameters();
  TrainResult result;
  EarlyStopping stopper(config.patience);
  detail::Stepper stepper(config);

  const std::vector<int> train_labels = select_labels(table.labels, split.train);
  const std::vector<int> val_labels = select_labels(table.labels, split.validation);

  if (model.uses_graph()) {
    if (!graph) throw UsageError(model.kind() + " requires a similarity configuration");
    IndexList rows = split.train;
    rows.insert(rows.end(), split.validation.begin(), split.validation.end());
    const GraphContext context = model.prepare_graph(build_graph(table, *graph, rows));
    const Matrix features = select_rows(table.features, rows);
    const auto n_train = static_cast<Index>(split.train.size());
    const auto n_val = static_cast<Index>(split.validation.size());
    result.graph_rows = rows;
    result.graph_config = graph;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
      Tape tape;
      const Var logits = model.forward(tape, features, &context);
      const Var loss = detail::supervised_objective(model, tape, slice_rows(logits, 0, n_train), train_labels);
      const double val_loss = cross_entropy(slice_rows(logits, n_train, n_val), val_labels).scalar();
      detail::require_finite(loss.scalar(), epoch);
      detail::require_finite(val_loss, epoch);
      result.history.push_back({epoch, loss.scalar(), val_loss});
      if (stopper.update(val_loss, epoch)) {
        result.best_params = snapshot(params);
        Matrix val_logits = logits.value().bottomRows(n_val);
        result.validation_predictions = argmax_rows(val_logits);
      }
      if (stopper.should_stop()) {
        result.stopped_early = true;
        break;
      }
      detail::zero_grads(params);
      tape.backward(loss);
      stepper.step(params);
    }
  } else {
    const Matrix val_features = select_rows(table.features, split.validation);
    Rng rng(derive_seed(config.seed, 0x4261746368ULL));
    IndexList order = split.train;
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
      rng.shuffle(std::span<Index>(order));
      double total = 0.0;
      std::size_t seen = 0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        const std::span<const Index> rows(order.data() + start, end - start);
        Tape tape;
        const Var logits = model.forward(tape, select_rows(table.features, rows), nullptr);
        const auto labels = select_labels(table.labels, rows);
        const Var loss = detail::supervised_objective(model, tape, logits, labels);
        detail::require_finite(loss.scalar(), epoch);
        total += loss.scalar() * static_cast<double>(rows.size());
        seen += rows.size();
        detail::zero_grads(params);
        tape.backward(loss);
        stepper.step(params);
      }
      Tape tape;
      const Var val_logits = model.forward(tape, val_features, nullptr);
      const double val_loss = cross_entropy(val_logits, val_labels).scalar();
      detail::require_finite(val_loss, epoch);
      result.history.push_back({epoch, total / static_cast<double>(seen), val_loss});
      if (stopper.update(val_loss, epoch)) {
        result.best_params = snapshot(params);
        result.validation_predictions = argmax_rows(val_logits.value());
      }
      if (stopper.should_stop()) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.best_epoch = stopper.best_epoch();
  restore(params, result.best_params);
  return result;
}

// Unsupervised GATE training over the graph of `rows`, full-batch, early
// stopping on the training loss. The model is left holding the best parameters.
inline TrainResult train_unsupervised(GATE& model, const DataTable& table, std::span<const Index> rows,
                                      const SimilarityConfig& graph, const TrainConfig& config) {
  config.validate();
  const auto params = model.parameters();
  TrainResult result;
  EarlyStopping stopper(config.patience);
  detail::Stepper stepper(config);

  const AdjacencyMatrix adjacency = binarize(build_graph(table, graph, rows));
  const Matrix features = select_rows(table.features, rows);
  result.graph_rows.assign(rows.begin(), rows.end());
  result.graph_config = graph;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Tape tape;
    const GateOutput out = model.forward(tape, features, adjacency.weights);
    const Var loss =
        gate_loss(features, out.reconstruction, out.embedding, adjacency.weights, model.config().structure_weight);
    detail::require_finite(loss.scalar(), epoch);
    result.history.push_back({epoch, loss.scalar(), std::numeric_limits<double>::quiet_NaN()});
    if (stopper.update(loss.scalar(), epoch)) result.best_params = snapshot(params);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
    detail::zero_grads(params);
    tape.backward(loss);
    stepper.step(params);
  }
  result.best_epoch = stopper.best_epoch();
  restore(params, result.best_params);
  return result;
}

// Inductive inference: the graph is rebuilt over every row of `features`
// with the configuration used in training, and only the rows in `rows` are
// read from the output. Takes features only; labels are never available here.
inline std::vector<int> predict_inductive(Model& model, const Matrix& features, const TrainResult& trained,
                                          const SimilarityConfig& config, std::span<const Index> rows) {
  std::optional<GraphContext> context;
  if (model.uses_graph()) {
    if (!trained.graph_config || !(*trained.graph_config == config)) {
      throw UsageError("inference graph configuration differs from the training configuration");
    }
    context = model.prepare_graph(build_graph(features, config));
  }
  const Matrix logits = model.logits(features, context ? &*context : nullptr);
  std::vector<int> all_predictions = argmax_rows(logits);
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(all_predictions[static_cast<std::size_t>(r)]);
  return out;
}

// Feature-only prediction for the given rows.
inline std::vector<int> predict_features(Model& model, const Matrix& features, std::span<const Index> rows) {
  if (model.uses_graph()) throw UsageError(model.kind() + " needs a graph for prediction");
  return argmax_rows(model.logits(select_rows(features, rows), nullptr));
}

}  // namespace tabgnn
