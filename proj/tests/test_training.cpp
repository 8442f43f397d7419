#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "tabgnn/training.hpp"

namespace tabgnn {
namespace {

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  int hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

DataTable synthetic(std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.seed = seed;
  return scale_features(generate_synthetic(spec));
}

TEST(EarlyStoppingRule, StrictImprovementAndPatience) {
  EarlyStopping s(2);
  EXPECT_TRUE(s.update(5.0, 1));
  EXPECT_TRUE(s.update(4.0, 2));
  EXPECT_FALSE(s.update(4.0, 3));  // equal is not an improvement
  EXPECT_FALSE(s.should_stop());
  EXPECT_TRUE(s.update(3.0, 4));
  EXPECT_FALSE(s.update(3.5, 5));
  EXPECT_FALSE(s.should_stop());
  EXPECT_FALSE(s.update(3.0, 6));
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best_epoch(), 4);
  EXPECT_EQ(s.best(), 3.0);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter p("p", Matrix::Constant(2, 2, 0.7));
  p.zero_grad();
  Parameter* params[] = {&p};
  AdamState state;
  adam_step(params, state);
  EXPECT_EQ(p.value, Matrix::Constant(2, 2, 0.7));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  Parameter p("p", Matrix::Zero(1, 3));
  p.grad.resize(1, 3);
  p.grad << 5.0, -0.01, 300.0;
  Parameter* params[] = {&p};
  AdamState state;
  adam_step(params, state, AdamOptions{0.1});
  EXPECT_NEAR(p.value(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(p.value(0, 1), 0.1, 1e-5);
  EXPECT_NEAR(p.value(0, 2), -0.1, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  Parameter p("p", Matrix::Constant(1, 2, 3.0));
  const Matrix target = (Matrix(1, 2) << -1.0, 2.0).finished();
  Parameter* params[] = {&p};
  AdamState state;
  for (int i = 0; i < 3000; ++i) {
    p.grad = 2.0 * (p.value - target);
    adam_step(params, state, AdamOptions{0.01});
  }
  EXPECT_LT((p.value - target).norm(), 1e-3);
}

TEST(TrainConfigValidation, RejectsBadValues) {
  TrainConfig c;
  c.patience = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = TrainConfig{};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = TrainConfig{};
  c.patience = 2000;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Supervised, GcnLearnsSeparatedClusters) {
  const DataTable t = synthetic();
  const FoldPlan plan = stratified_kfold(t, 10, 0);
  const SplitIndices split = split_for_test_fold(plan, 0);
  const SimilarityConfig graph{Metric::cosine, 0.5, EdgeMode::binary};
  GCN model(5, 4, GCNConfig{}, 1);
  TrainConfig config;
  const TrainResult r = train_supervised(model, t, split, config, graph);
  EXPECT_GE(r.best_epoch, 1);
  EXPECT_EQ(r.graph_rows.size(), split.train.size() + split.validation.size());
  const auto pred = predict_inductive(model, t.features, r, graph, split.test);
  EXPECT_GE(accuracy(select_labels(t.labels, split.test), pred), 0.9);
}

TEST(Supervised, FirstRecordedLossIsAtInitialParameters) {
  const DataTable t = synthetic();
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 0), 0);
  const SimilarityConfig graph{Metric::euclidean, 0.7, EdgeMode::weighted};
  GCN model(5, 4, GCNConfig{}, 2);
  IndexList rows = split.train;
  rows.insert(rows.end(), split.validation.begin(), split.validation.end());
  GraphContext ctx = model.prepare_graph(build_graph(t, graph, rows));
  const Matrix logits = model.logits(select_rows(t.features, rows), &ctx);
  Tape tape;
  const double initial =
      cross_entropy(tape.constant(logits.topRows(static_cast<Index>(split.train.size()))), select_labels(t.labels, split.train))
          .scalar();
  TrainConfig config;
  config.max_epochs = 3;
  config.patience = 3;
  const TrainResult r = train_supervised(model, t, split, config, graph);
  ASSERT_EQ(r.epochs_ran(), 3);
  EXPECT_DOUBLE_EQ(r.history[0].train_loss, initial);
}

TEST(Supervised, DeterministicForFixedSeed) {
  const DataTable t = synthetic(3);
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 3), 2);
  TrainConfig config;
  config.max_epochs = 40;
  config.patience = 10;
  auto run = [&] {
    MLP model(5, 4, MLPConfig{}, 4);
    return train_supervised(model, t, split, config).history;
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].train_loss, b[i].train_loss);
    EXPECT_EQ(a[i].val_loss, b[i].val_loss);
  }
}

TEST(Supervised, StopsEarlyAndRestoresBest) {
  const DataTable t = synthetic(5);
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 5), 0);
  TrainConfig config;
  config.learning_rate = 0.05;
  config.patience = 5;
  MLP model(5, 4, MLPConfig{}, 6);
  const TrainResult r = train_supervised(model, t, split, config);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.epochs_ran(), r.best_epoch + config.patience);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.history) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_loss, best);
  Tape tape;
  const Var val = model.forward(tape, select_rows(t.features, split.validation), nullptr);
  EXPECT_NEAR(cross_entropy(val, select_labels(t.labels, split.validation)).scalar(), best, 1e-12);
}

TEST(Supervised, LogisticRegressionSeparatesLinearData) {
  DataTable t;
  Rng rng(7);
  t.features.resize(120, 2);
  for (Index r = 0; r < 120; ++r) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    t.features(r, 0) = x;
    t.features(r, 1) = y;
    t.labels.push_back(x + 0.5 * y > 0.1 ? 1 : 0);
  }
  for (Index r = 0; r < 120; ++r) {
    // Push points out of a margin around the boundary.
    const int sign = t.labels[static_cast<std::size_t>(r)] ? 1 : -1;
    t.features(r, 0) += 0.2 * sign;
  }
  t.class_count = 2;
  t.feature_names = {"x", "y"};
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 0), 0);
  TrainConfig config;
  config.learning_rate = 0.05;
  LogisticRegression lr(2, 2, LRConfig{Penalty::l2, 100.0}, 0);
  train_supervised(lr, t, split, config);
  IndexList all(120);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(accuracy(t.labels, predict_features(lr, t.features, all)), 1.0);
}

TEST(Supervised, NonFiniteLossRaisesTrainingFailure) {
  DataTable t = synthetic();
  t.features.col(0).setConstant(1e300);
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 0), 0);
  LogisticRegression lr(5, 4, LRConfig{}, 0);
  lr.weight().value.setConstant(1e10);
  try {
    train_supervised(lr, t, split, TrainConfig{});
    FAIL() << "expected TrainingFailure";
  } catch (const TrainingFailure& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(Supervised, GraphModelNeedsGraphConfig) {
  const DataTable t = synthetic();
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 0), 0);
  GCN model(5, 4, GCNConfig{}, 0);
  EXPECT_THROW(train_supervised(model, t, split, TrainConfig{}), UsageError);
}

// Test rows must not influence training: neither their labels nor their
// features may change anything the trainer produces.
TEST(Leakage, TestRowsDoNotAffectTraining) {
  const DataTable base = synthetic(8);
  const SplitIndices split = split_for_test_fold(stratified_kfold(base, 10, 8), 4);
  DataTable altered = base;
  Rng rng(9);
  for (Index r : split.test) {
    altered.labels[static_cast<std::size_t>(r)] = (altered.labels[static_cast<std::size_t>(r)] + 1) % 4;
    for (Index c = 0; c < altered.cols(); ++c) altered.features(r, c) = rng.uniform();
  }
  const SimilarityConfig graph{Metric::cosine, 0.8, EdgeMode::weighted};
  TrainConfig config;
  config.max_epochs = 30;
  config.patience = 30;
  auto train = [&](const DataTable& t) {
    GAT model(5, 4, GATConfig{{8}, 2, 1, Activation::elu()}, 10);
    return train_supervised(model, t, split, config, graph);
  };
  const TrainResult a = train(base);
  const TrainResult b = train(altered);
  ASSERT_EQ(a.best_params.size(), b.best_params.size());
  for (std::size_t i = 0; i < a.best_params.size(); ++i) EXPECT_EQ(a.best_params[i], b.best_params[i]);
  EXPECT_EQ(a.history.back().val_loss, b.history.back().val_loss);
}

TEST(Inductive, ConfigMismatchRejected) {
  const DataTable t = synthetic();
  const SplitIndices split = split_for_test_fold(stratified_kfold(t, 10, 0), 0);
  const SimilarityConfig graph{Metric::cosine, 0.5, EdgeMode::binary};
  GCN model(5, 4, GCNConfig{}, 0);
  TrainConfig config;
  config.max_epochs = 2;
  config.patience = 2;
  const TrainResult r = train_supervised(model, t, split, config, graph);
  SimilarityConfig other = graph;
  other.threshold = 0.6;
  EXPECT_THROW(predict_inductive(model, t.features, r, other, split.test), UsageError);
}

TEST(Unsupervised, GateLossDecreasesAndEmbeddingsSeparateClusters) {
  const DataTable t = synthetic(11);
  IndexList rows(static_cast<std::size_t>(t.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  const SimilarityConfig graph{Metric::cosine, 0.9, EdgeMode::binary};
  GATE gate(5, GATEConfig{{16, 8}, Activation::elu(), 1.0}, 12);
  TrainConfig config;
  config.max_epochs = 300;
  config.learning_rate = 0.005;
  const TrainResult r = train_unsupervised(gate, t, rows, graph, config);
  EXPECT_LT(r.history[static_cast<std::size_t>(r.best_epoch - 1)].train_loss, 0.5 * r.history.front().train_loss);
  // Nearest class centroid in embedding space.
  const Matrix z = gate.embed(t.features, build_graph(t, graph));
  Matrix centroid = Matrix::Zero(4, z.cols());
  for (Index i = 0; i < z.rows(); ++i) centroid.row(t.labels[static_cast<std::size_t>(i)]) += z.row(i) / 50.0;
  int correct = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    (centroid.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&best);
    correct += static_cast<int>(best) == t.labels[static_cast<std::size_t>(i)];
  }
  EXPECT_GE(correct, 180);
}

TEST(History, CsvFormat) {
  TrainResult r;
  r.history = {{1, 0.5, 0.25}, {2, 0.125, std::numeric_limits<double>::quiet_NaN()}};
  std::ostringstream out;
  write_history_csv(out, r);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,\n");
}

}  // namespace
}  // namespace tabgnn
