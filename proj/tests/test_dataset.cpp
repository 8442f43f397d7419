#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "tabgnn/dataset.hpp"

#ifndef TABGNN_DATA_DIR
#define TABGNN_DATA_DIR "data"
#endif

namespace tabgnn {
namespace {

DataTable parse(const std::string& text, LabelColumn label = std::string("label")) {
  std::istringstream in(text);
  return parse_csv(in, label, "t");
}

DataTable labelled(const std::vector<int>& labels) {
  DataTable t;
  t.labels = labels;
  t.class_count = *std::max_element(labels.begin(), labels.end()) + 1;
  t.features = Matrix::Zero(static_cast<Index>(labels.size()), 1);
  for (Index r = 0; r < t.rows(); ++r) t.features(r, 0) = static_cast<double>(r);
  t.feature_names = {"x"};
  return t;
}

TEST(Csv, ParsesFeaturesAndLabelByName) {
  const DataTable t = parse("a,label,b\n1,x,2\n3.5,y,-4e-1\n");
  ASSERT_EQ(t.rows(), 2);
  ASSERT_EQ(t.cols(), 2);
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(t.features(1, 0), 3.5);
  EXPECT_DOUBLE_EQ(t.features(1, 1), -0.4);
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.class_count, 2);
}

TEST(Csv, LabelByIndex) {
  const DataTable t = parse("y,a\n1,0.5\n2,0.25\n", std::size_t{0});
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"a"}));
  EXPECT_DOUBLE_EQ(t.features(1, 0), 0.25);
}

TEST(Csv, LabelsEncodedInFirstAppearanceOrder) {
  const DataTable t = parse("f,label\n0,b\n1,a\n2,b\n3,a\n");
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1, 0, 1}));
}

TEST(Csv, RejectsSingleClass) {
  EXPECT_THROW(parse("f,label\n0,a\n1,a\n"), DataError);
}

TEST(Csv, RejectsSingleRow) {
  EXPECT_THROW(parse("f,label\n0,a\n"), DataError);
}

TEST(Csv, ErrorsNameLineAndColumn) {
  try {
    parse("f,g,label\n0,1,a\n1,oops,b\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
    EXPECT_NE(what.find("'g'"), std::string::npos) << what;
  }
}

TEST(Csv, RejectsRaggedRowsMissingLabelAndNonFinite) {
  EXPECT_THROW(parse("f,label\n0,a,9\n1,b\n"), DataError);
  EXPECT_THROW(parse("f,label\n0,a\n1,b\n", std::string("class")), DataError);
  EXPECT_THROW(parse("f,label\nnan,a\n1,b\n"), DataError);
  EXPECT_THROW(parse("f,label\ninf,a\n1,b\n"), DataError);
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(parse("f,label\n"), DataError);
}

TEST(Csv, WriteThenParseRoundTrips) {
  DataTable t = labelled({0, 1, 2, 1});
  t.features(2, 0) = 0.1 + 0.2;
  std::stringstream buf;
  write_csv(buf, t);
  const DataTable back = parse_csv(buf, std::string("label"));
  EXPECT_EQ(back.features, t.features);
  EXPECT_EQ(back.labels, t.labels);
}

TEST(Csv, BundledWineShape) {
  const DataTable t = load_csv(std::string(TABGNN_DATA_DIR) + "/wine.csv", std::string("class"));
  EXPECT_EQ(t.rows(), 178);
  EXPECT_EQ(t.cols(), 13);
  EXPECT_EQ(t.class_counts(), (std::vector<int>{59, 71, 48}));
  EXPECT_EQ(t.name, "wine");
}

TEST(Scaling, HandExample) {
  DataTable t = labelled({0, 1, 0});
  t.features.resize(3, 2);
  t.features << 2, 5, 4, 5, 6, 5;
  const DataTable s = scale_features(t);
  EXPECT_DOUBLE_EQ(s.features(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.features(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.features(2, 0), 1.0);
  EXPECT_TRUE(s.features.col(1).isZero());
}

TEST(Scaling, RangeAndIdempotence) {
  Rng rng(4);
  DataTable t = labelled({0, 1, 0, 1, 2, 2, 0});
  t.features.resize(7, 3);
  for (Index i = 0; i < t.features.size(); ++i) t.features.data()[i] = rng.uniform(-50, 50);
  const DataTable once = scale_features(t);
  for (Index c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(once.features.col(c).minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(once.features.col(c).maxCoeff(), 1.0);
  }
  EXPECT_TRUE(scale_features(once).features.isApprox(once.features, 1e-15));
}

TEST(Folds, BalancedStratificationOnEvenClasses) {
  std::vector<int> labels;
  for (int k = 0; k < 4; ++k) labels.insert(labels.end(), 50, k);
  const FoldPlan plan = stratified_kfold(labelled(labels), 10, 7);
  EXPECT_TRUE(plan.stratified);
  for (int f = 0; f < 10; ++f) {
    std::vector<int> per_class(4, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (plan.assignments[i] == f) ++per_class[static_cast<std::size_t>(labels[i])];
    }
    EXPECT_EQ(per_class, (std::vector<int>{5, 5, 5, 5})) << "fold " << f;
  }
}

TEST(Folds, UnevenClassSpreadsRemainder) {
  // 59 rows of one class: nine folds of 6 and one of 5.
  std::vector<int> labels(59, 0);
  labels.insert(labels.end(), 41, 1);
  const FoldPlan plan = stratified_kfold(labelled(labels), 10, 3);
  std::vector<int> per_fold(10, 0);
  for (std::size_t i = 0; i < 59; ++i) ++per_fold[static_cast<std::size_t>(plan.assignments[i])];
  std::sort(per_fold.begin(), per_fold.end());
  EXPECT_EQ(per_fold.front(), 5);
  EXPECT_EQ(std::count(per_fold.begin(), per_fold.end(), 6), 9);
}

TEST(Folds, SizesDifferByAtMostOneOnRealData) {
  const DataTable t = load_csv(std::string(TABGNN_DATA_DIR) + "/wine.csv", std::string("class"));
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto sizes = stratified_kfold(t, 10, seed).fold_sizes();
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1);
  }
}

TEST(Folds, DeterministicForSeedAndSensitiveToIt) {
  const DataTable two = labelled([] {
    std::vector<int> v(30, 0);
    v.insert(v.end(), 30, 1);
    return v;
  }());
  EXPECT_EQ(stratified_kfold(two, 10, 5), stratified_kfold(two, 10, 5));
  EXPECT_NE(stratified_kfold(two, 10, 5).assignments, stratified_kfold(two, 10, 6).assignments);
  EXPECT_NE(stratified_kfold(two, 10, 5).hash(), stratified_kfold(two, 10, 6).hash());
}

TEST(Folds, SmallClassFallsBackToUnstratified) {
  std::vector<int> labels(30, 0);
  labels.insert(labels.end(), 3, 1);
  const FoldPlan plan = stratified_kfold(labelled(labels), 10, 1);
  EXPECT_FALSE(plan.stratified);
  const auto sizes = plan.fold_sizes();
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  EXPECT_LE(*hi - *lo, 1);
}

TEST(Folds, RejectsBadFoldCounts) {
  const DataTable t = labelled({0, 1, 0, 1, 0});
  EXPECT_THROW(stratified_kfold(t, 1, 0), UsageError);
  EXPECT_THROW(stratified_kfold(t, 6, 0), UsageError);
}

TEST(Split, CyclicValidationFolds) {
  FoldPlan plan;
  plan.folds = 10;
  for (int i = 0; i < 30; ++i) plan.assignments.push_back(i % 10);
  auto folds_of = [&](const IndexList& rows) {
    std::set<int> s;
    for (Index r : rows) s.insert(plan.assignments[static_cast<std::size_t>(r)]);
    return s;
  };
  const SplitIndices mid = split_for_test_fold(plan, 3);
  EXPECT_EQ(folds_of(mid.test), (std::set<int>{3}));
  EXPECT_EQ(folds_of(mid.validation), (std::set<int>{4, 5}));
  EXPECT_EQ(folds_of(mid.train).size(), 7u);
  const SplitIndices wrap = split_for_test_fold(plan, 9);
  EXPECT_EQ(folds_of(wrap.validation), (std::set<int>{0, 1}));
  const SplitIndices wrap2 = split_for_test_fold(plan, 8);
  EXPECT_EQ(folds_of(wrap2.validation), (std::set<int>{9, 0}));
}

TEST(Split, PartitionsEveryRowExactlyOnce) {
  std::vector<int> labels(37, 0);
  labels.insert(labels.end(), 25, 1);
  const FoldPlan plan = stratified_kfold(labelled(labels), 10, 11);
  for (int f = 0; f < 10; ++f) {
    const SplitIndices s = split_for_test_fold(plan, f);
    std::vector<int> seen(labels.size(), 0);
    for (const IndexList* part : {&s.train, &s.validation, &s.test}) {
      for (Index r : *part) ++seen[static_cast<std::size_t>(r)];
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  EXPECT_THROW(split_for_test_fold(plan, 10), UsageError);
}

TEST(FoldPlanFile, RoundTrip) {
  std::vector<int> labels(20, 0);
  labels.insert(labels.end(), 20, 1);
  const FoldPlan plan = stratified_kfold(labelled(labels), 10, 1234);
  std::stringstream buf;
  write_fold_plan(buf, plan);
  EXPECT_EQ(buf.str().rfind("# seed=1234 folds=10\nrow_index,fold_id\n", 0), 0u);
  FoldPlan back = read_fold_plan(buf);
  EXPECT_EQ(back.assignments, plan.assignments);
  EXPECT_EQ(back.seed, plan.seed);
  EXPECT_EQ(back.hash(), plan.hash());
  std::istringstream bad("# seed=1 folds=2\nrow_index,fold_id\n0,5\n");
  EXPECT_THROW(read_fold_plan(bad), DataError);
}

TEST(Synthetic, ShapeBalanceAndDeterminism) {
  const SyntheticSpec spec{};
  const DataTable a = generate_synthetic(spec);
  EXPECT_EQ(a.rows(), 200);
  EXPECT_EQ(a.cols(), 5);
  EXPECT_EQ(a.class_counts(), (std::vector<int>{50, 50, 50, 50}));
  EXPECT_EQ(generate_synthetic(spec).features, a.features);
  SyntheticSpec other = spec;
  other.seed = 1;
  EXPECT_NE(generate_synthetic(other).features, a.features);
}

TEST(Synthetic, WellSeparatedClustersAreNearestCentroidSeparable) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const DataTable t = generate_synthetic(spec);
    Matrix centroid = Matrix::Zero(4, 5);
    for (Index r = 0; r < t.rows(); ++r) centroid.row(t.labels[static_cast<std::size_t>(r)]) += t.features.row(r) / 50.0;
    int correct = 0;
    for (Index r = 0; r < t.rows(); ++r) {
      Index best = 0;
      (centroid.rowwise() - t.features.row(r)).rowwise().squaredNorm().minCoeff(&best);
      correct += static_cast<int>(best) == t.labels[static_cast<std::size_t>(r)];
    }
    EXPECT_GE(correct, 198) << "seed " << seed;
  }
}

TEST(Synthetic, ZeroSeparationSharesOneMean) {
  SyntheticSpec spec;
  spec.cluster_mean_separation = 0.0;
  spec.samples = 4000;
  spec.cluster_stddev = 1.0;
  const DataTable t = generate_synthetic(spec);
  for (int k = 0; k < 4; ++k) {
    const Eigen::RowVectorXd m = t.features.middleRows(k * 1000, 1000).colwise().mean();
    EXPECT_LT(m.cwiseAbs().maxCoeff(), 0.15) << "class " << k;
  }
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec spec;
  spec.samples = 201;
  EXPECT_THROW(generate_synthetic(spec), UsageError);
  spec = SyntheticSpec{};
  spec.cluster_stddev = -1;
  EXPECT_THROW(generate_synthetic(spec), UsageError);
}

}  // namespace
}  // namespace tabgnn
