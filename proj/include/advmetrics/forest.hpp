#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advmetrics/error.hpp"

namespace advmetrics {

/// One adversarial image's identity: where it came from, its measured
/// metric values, and the binary verdict of each detector (1 = detected).
struct SampleRecord {
  std::string sample_id;
  std::string attack_family;
  std::string config_id;
  std::map<std::string, double> features;
  std::map<std::string, int> labels;
};

struct ForestHyperparams {
  int n_trees = 100;
  int max_depth = 0;           ///< 0 = unlimited
  int min_samples_split = 2;
  int features_per_split = 0;  ///< 0 = floor(sqrt(feature count))
  std::uint64_t seed = 0;
};

/// Node of a binary decision tree. Internal nodes route row[feature_index]
/// <= threshold to `left`; leaves (left == -1) hold training class counts.
struct TreeNode {
  std::int32_t feature_index = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int64_t count0 = 0;
  std::int64_t count1 = 0;
  bool is_leaf() const noexcept { return left < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  /// Majority class of the reached leaf; ties resolve to class 1.
  int predict(const Eigen::RowVectorXd& row) const;
};

/// Trained random forest. Immutable and safe to share across threads.
class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(ForestHyperparams hp, std::vector<std::string> feature_names,
              std::vector<DecisionTree> trees, std::vector<double> importances);

  const ForestHyperparams& hyperparams() const noexcept { return hp_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  /// Normalized impurity-decrease importances, aligned with feature_names().
  /// Sums to 1, or is all zero when no split occurred anywhere.
  const std::vector<double>& importances() const noexcept {
    return importances_;
  }

  /// True when every tree is a single leaf (e.g. trained on one class).
  bool constant_prediction() const noexcept;

  /// Majority vote over trees; forest-level ties resolve to class 1.
  int predict_row(const Eigen::RowVectorXd& row) const;

  /// Vote on a named-feature row. Throws MissingFeature if any of
  /// feature_names() is absent.
  int predict(const std::map<std::string, double>& features) const;

  Eigen::RowVectorXd gather_row(
      const std::map<std::string, double>& features) const;

  std::string to_json_string() const;
  static ForestModel from_json_string(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ForestModel load(const std::filesystem::path& path);

 private:
  ForestHyperparams hp_;
  std::vector<std::string> feature_names_;
  std::vector<DecisionTree> trees_;
  std::vector<double> importances_;
};

struct EvalReport {
  double accuracy = 0.0;
  std::int64_t tp = 0;  ///< predicted 1, label 1
  std::int64_t fp = 0;  ///< predicted 1, label 0
  std::int64_t fn = 0;  ///< predicted 0, label 1
  std::int64_t tn = 0;  ///< predicted 0, label 0
  std::int64_t n_test = 0;
  std::vector<std::string> feature_set;
};

/// Per-held-out-attack evaluation reports, keyed by attack family.
struct LooReport {
  std::map<std::string, EvalReport> per_attack;
};

/// Sample Pearson correlation coefficient. Throws DegenerateInput when
/// either series has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// The bootstrap sample used by tree `tree_index` of a forest trained with
/// `seed` on n records. Exposed so the resampling scheme is testable.
std::vector<std::size_t> bootstrap_indices(std::uint64_t seed,
                                           std::uint64_t tree_index,
                                           std::size_t n);

/// Deterministic stratified split: both classes keep the train fraction
/// within one sample. Throws DegenerateInput when a class has < 2 members.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>>
stratified_split(const std::vector<SampleRecord>& records,
                 double train_fraction, const std::string& label,
                 std::uint64_t seed);

/// Plain shuffled split, no stratification.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> shuffle_split(
    const std::vector<SampleRecord>& records, double train_fraction,
    std::uint64_t seed);

/// Fit a forest of hp.n_trees trees on bootstrap samples. Each tree's
/// random stream depends only on (hp.seed, tree index), so the result is
/// bit-identical for any n_jobs.
ForestModel train_forest(const std::vector<SampleRecord>& records,
                         const std::vector<std::string>& feature_set,
                         const std::string& label, const ForestHyperparams& hp,
                         int n_jobs = 1);

EvalReport evaluate(const ForestModel& model,
                    const std::vector<SampleRecord>& test,
                    const std::string& label);

/// For each attack family: train on every other family, evaluate on the
/// held-out one. Throws DegenerateInput when fewer than two families exist
/// or some family's training complement has a single class.
LooReport leave_one_attack_out(const std::vector<SampleRecord>& records,
                               const std::vector<std::string>& feature_set,
                               const std::string& label,
                               const ForestHyperparams& hp, int n_jobs = 1);

/// (feature, importance) sorted by descending importance, ties by name.
std::vector<std::pair<std::string, double>> rank_features(
    const ForestModel& model);

}  // namespace advmetrics
