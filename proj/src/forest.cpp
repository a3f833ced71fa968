#include "advmetrics/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "advmetrics/rng.hpp"

namespace advmetrics {

namespace {

using json = nlohmann::ordered_json;

struct TrainData {
  Eigen::MatrixXd x;  // n x d, column f = feature feature_set[f]
  std::vector<std::int8_t> y;
};

TrainData build_train_data(const std::vector<SampleRecord>& records,
                           const std::vector<std::string>& feature_set,
                           const std::string& label) {
  if (records.empty()) {
    throw DegenerateInput("train: no records");
  }
  if (feature_set.empty()) {
    throw Error("train: empty feature set");
  }
  TrainData d;
  const Eigen::Index n = static_cast<Eigen::Index>(records.size());
  const Eigen::Index k = static_cast<Eigen::Index>(feature_set.size());
  d.x.resize(n, k);
  d.y.resize(records.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const SampleRecord& r = records[static_cast<std::size_t>(i)];
    for (Eigen::Index f = 0; f < k; ++f) {
      const auto it = r.features.find(feature_set[static_cast<std::size_t>(f)]);
      if (it == r.features.end()) {
        throw MissingFeature("train: record '" + r.sample_id +
                             "' lacks feature '" +
                             feature_set[static_cast<std::size_t>(f)] + "'");
      }
      if (!std::isfinite(it->second)) {
        throw Error("train: non-finite value of '" + it->first +
                    "' in record '" + r.sample_id + "'");
      }
      d.x(i, f) = it->second;
    }
    const auto lt = r.labels.find(label);
    if (lt == r.labels.end()) {
      throw UnknownLabel("train: record '" + r.sample_id + "' lacks label '" +
                         label + "'");
    }
    if (lt->second != 0 && lt->second != 1) {
      throw Error("train: label '" + label + "' must be 0 or 1");
    }
    d.y[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(lt->second);
  }
  return d;
}

double gini(double c0, double c1) {
  const double n = c0 + c1;
  if (n == 0.0) return 0.0;
  const double p0 = c0 / n;
  const double p1 = c1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

/// Midpoint of two distinct sorted values, nudged so that `lo <= t < hi`
/// holds even when the midpoint rounds up to hi.
double split_threshold(double lo, double hi) {
  const double t = lo + (hi - lo) / 2.0;
  return t < hi ? t : lo;
}

struct SplitChoice {
  Eigen::Index feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

std::vector<std::size_t> draw_bootstrap(RngStream& stream, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = static_cast<std::size_t>(stream.below(n));
  }
  return idx;
}

struct PendingNode {
  std::int32_t node = 0;
  std::vector<std::size_t> samples;  // row indices, bootstrap duplicates kept
  int depth = 0;
};

DecisionTree build_tree(const TrainData& d, std::vector<std::size_t> root,
                        const ForestHyperparams& hp,
                        Eigen::Index features_per_split, RngStream& stream,
                        std::vector<double>& importance) {
  const Eigen::Index dims = d.x.cols();
  const double n_total = static_cast<double>(root.size());

  DecisionTree tree;
  std::vector<PendingNode> stack;
  tree.nodes.emplace_back();
  stack.push_back(PendingNode{0, std::move(root), 0});

  std::vector<std::pair<double, std::int8_t>> sorted;
  while (!stack.empty()) {
    PendingNode item = std::move(stack.back());
    stack.pop_back();

    std::int64_t c0 = 0, c1 = 0;
    for (const std::size_t s : item.samples) {
      (d.y[s] == 0 ? c0 : c1)++;
    }
    TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];
    node.count0 = c0;
    node.count1 = c1;

    const bool depth_capped = hp.max_depth > 0 && item.depth >= hp.max_depth;
    if (c0 == 0 || c1 == 0 || depth_capped ||
        static_cast<int>(item.samples.size()) < hp.min_samples_split) {
      continue;  // leaf
    }

    // Candidate features for this node, evaluated in index order so that
    // equal decreases resolve to the lowest feature index and threshold.
    std::vector<std::size_t> candidates = stream.sample_without_replacement(
        static_cast<std::size_t>(dims),
        static_cast<std::size_t>(features_per_split));
    std::sort(candidates.begin(), candidates.end());

    const double node_n = static_cast<double>(item.samples.size());
    const double node_gini =
        gini(static_cast<double>(c0), static_cast<double>(c1));
    SplitChoice best;
    for (const std::size_t f : candidates) {
      sorted.clear();
      sorted.reserve(item.samples.size());
      for (const std::size_t s : item.samples) {
        sorted.emplace_back(d.x(static_cast<Eigen::Index>(s),
                                static_cast<Eigen::Index>(f)),
                            d.y[s]);
      }
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      double left0 = 0.0, left1 = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        (sorted[i].second == 0 ? left0 : left1) += 1.0;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double nl = left0 + left1;
        const double nr = node_n - nl;
        const double right0 = static_cast<double>(c0) - left0;
        const double right1 = static_cast<double>(c1) - left1;
        const double decrease = node_gini -
                                (nl / node_n) * gini(left0, left1) -
                                (nr / node_n) * gini(right0, right1);
        if (decrease > best.decrease) {
          best.feature = static_cast<Eigen::Index>(f);
          best.threshold = split_threshold(sorted[i].first, sorted[i + 1].first);
          best.decrease = decrease;
        }
      }
    }

    if (best.feature < 0 || best.decrease <= 0.0) {
      continue;  // no useful split among the drawn features
    }

    importance[static_cast<std::size_t>(best.feature)] +=
        (node_n / n_total) * best.decrease;

    std::vector<std::size_t> left_samples, right_samples;
    left_samples.reserve(item.samples.size());
    right_samples.reserve(item.samples.size());
    for (const std::size_t s : item.samples) {
      const double v =
          d.x(static_cast<Eigen::Index>(s), best.feature);
      (v <= best.threshold ? left_samples : right_samples).push_back(s);
    }

    const std::int32_t left_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::int32_t right_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& parent = tree.nodes[static_cast<std::size_t>(item.node)];
    parent.feature_index = static_cast<std::int32_t>(best.feature);
    parent.threshold = best.threshold;
    parent.left = left_id;
    parent.right = right_id;

    stack.push_back(PendingNode{right_id, std::move(right_samples),
                                item.depth + 1});
    stack.push_back(PendingNode{left_id, std::move(left_samples),
                                item.depth + 1});
  }
  return tree;
}

}  // namespace

int DecisionTree::predict(const Eigen::RowVectorXd& row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row[n.feature_index] <= n.threshold
                                     ? n.left
                                     : n.right);
  }
  return nodes[i].count1 >= nodes[i].count0 ? 1 : 0;
}

ForestModel::ForestModel(ForestHyperparams hp,
                         std::vector<std::string> feature_names,
                         std::vector<DecisionTree> trees,
                         std::vector<double> importances)
    : hp_(hp),
      feature_names_(std::move(feature_names)),
      trees_(std::move(trees)),
      importances_(std::move(importances)) {}

bool ForestModel::constant_prediction() const noexcept {
  for (const DecisionTree& t : trees_) {
    if (t.nodes.size() > 1) return false;
  }
  return true;
}

int ForestModel::predict_row(const Eigen::RowVectorXd& row) const {
  std::int64_t votes1 = 0;
  for (const DecisionTree& t : trees_) {
    votes1 += t.predict(row);
  }
  return 2 * votes1 >= static_cast<std::int64_t>(trees_.size()) ? 1 : 0;
}

Eigen::RowVectorXd ForestModel::gather_row(
    const std::map<std::string, double>& features) const {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(feature_names_.size()));
  for (std::size_t f = 0; f < feature_names_.size(); ++f) {
    const auto it = features.find(feature_names_[f]);
    if (it == features.end()) {
      throw MissingFeature("predict: feature '" + feature_names_[f] +
                           "' missing from input");
    }
    row[static_cast<Eigen::Index>(f)] = it->second;
  }
  return row;
}

int ForestModel::predict(const std::map<std::string, double>& features) const {
  return predict_row(gather_row(features));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error("pearson: series must have equal length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInput("pearson: zero-variance series");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t seed,
                                           std::uint64_t tree_index,
                                           std::size_t n) {
  RngStream stream = RngStream::derived(seed, tree_index);
  return draw_bootstrap(stream, n);
}

namespace {

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_by_picks(
    const std::vector<SampleRecord>& records,
    const std::vector<std::vector<std::size_t>>& groups,
    const std::vector<std::size_t>& take) {
  std::vector<char> in_train(records.size(), 0);
  std::vector<SampleRecord> train;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = 0; i < take[g]; ++i) {
      in_train[groups[g][i]] = 1;
      train.push_back(records[groups[g][i]]);
    }
  }
  std::vector<SampleRecord> test;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!in_train[i]) test.push_back(records[i]);
  }
  return {std::move(train), std::move(test)};
}

std::size_t train_count(double fraction, std::size_t group_size) {
  const auto want = static_cast<std::size_t>(std::llround(
      fraction * static_cast<double>(group_size)));
  return std::clamp<std::size_t>(want, 1, group_size - 1);
}

}  // namespace

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>>
stratified_split(const std::vector<SampleRecord>& records,
                 double train_fraction, const std::string& label,
                 std::uint64_t seed) {
  if (records.empty()) throw DegenerateInput("stratified_split: no records");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("stratified_split: train_fraction must be in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = records[i].labels.find(label);
    if (it == records[i].labels.end()) {
      throw UnknownLabel("stratified_split: record '" + records[i].sample_id +
                         "' lacks label '" + label + "'");
    }
    if (it->second != 0 && it->second != 1) {
      throw Error("stratified_split: label must be 0 or 1");
    }
    groups[static_cast<std::size_t>(it->second)].push_back(i);
  }
  if (groups[0].size() < 2 || groups[1].size() < 2) {
    throw DegenerateInput(
        "stratified_split: both classes need at least 2 members");
  }
  RngStream stream(seed);
  stream.shuffle(groups[0]);
  stream.shuffle(groups[1]);
  const std::vector<std::size_t> take = {
      train_count(train_fraction, groups[0].size()),
      train_count(train_fraction, groups[1].size())};
  return split_by_picks(records, groups, take);
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> shuffle_split(
    const std::vector<SampleRecord>& records, double train_fraction,
    std::uint64_t seed) {
  if (records.size() < 2) throw DegenerateInput("shuffle_split: need >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("shuffle_split: train_fraction must be in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> groups(1);
  groups[0].resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) groups[0][i] = i;
  RngStream stream(seed);
  stream.shuffle(groups[0]);
  const std::vector<std::size_t> take = {
      train_count(train_fraction, records.size())};
  return split_by_picks(records, groups, take);
}

ForestModel train_forest(const std::vector<SampleRecord>& records,
                         const std::vector<std::string>& feature_set,
                         const std::string& label, const ForestHyperparams& hp,
                         int n_jobs) {
  if (hp.n_trees <= 0) throw Error("train: n_trees must be positive");
  if (hp.min_samples_split < 2) {
    throw Error("train: min_samples_split must be >= 2");
  }
  const TrainData data = build_train_data(records, feature_set, label);
  const Eigen::Index dims = data.x.cols();
  Eigen::Index per_split = hp.features_per_split > 0
                               ? static_cast<Eigen::Index>(hp.features_per_split)
                               : static_cast<Eigen::Index>(std::floor(
                                     std::sqrt(static_cast<double>(dims))));
  if (per_split > dims) {
    throw Error("train: features_per_split exceeds feature count");
  }
  per_split = std::max<Eigen::Index>(per_split, 1);

  const std::size_t n = records.size();
  std::vector<DecisionTree> trees(static_cast<std::size_t>(hp.n_trees));
  std::vector<std::vector<double>> tree_importance(
      static_cast<std::size_t>(hp.n_trees),
      std::vector<double>(static_cast<std::size_t>(dims), 0.0));

  const auto fit_one = [&](std::size_t t) {
    RngStream stream = RngStream::derived(hp.seed, t);
    std::vector<std::size_t> boot = draw_bootstrap(stream, n);
    trees[t] = build_tree(data, std::move(boot), hp, per_split, stream,
                          tree_importance[t]);
  };

  const int workers = std::clamp(n_jobs, 1, hp.n_trees);
  if (workers == 1) {
    for (std::size_t t = 0; t < trees.size(); ++t) fit_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= trees.size()) return;
          fit_one(t);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  // Sum per-tree importance in tree order so the result does not depend on
  // scheduling, then normalize.
  std::vector<double> importances(static_cast<std::size_t>(dims), 0.0);
  for (const std::vector<double>& imp : tree_importance) {
    for (std::size_t f = 0; f < importances.size(); ++f) {
      importances[f] += imp[f];
    }
  }
  const double total =
      std::accumulate(importances.begin(), importances.end(), 0.0);
  if (total > 0.0) {
    for (double& v : importances) v /= total;
  }
  return ForestModel(hp, feature_set, std::move(trees), std::move(importances));
}

EvalReport evaluate(const ForestModel& model,
                    const std::vector<SampleRecord>& test,
                    const std::string& label) {
  if (test.empty()) throw DegenerateInput("evaluate: empty test set");
  EvalReport report;
  report.feature_set = model.feature_names();
  for (const SampleRecord& r : test) {
    const auto it = r.labels.find(label);
    if (it == r.labels.end()) {
      throw UnknownLabel("evaluate: record '" + r.sample_id +
                         "' lacks label '" + label + "'");
    }
    const int truth = it->second;
    const int pred = model.predict(r.features);
    if (pred == 1 && truth == 1) report.tp++;
    if (pred == 1 && truth == 0) report.fp++;
    if (pred == 0 && truth == 1) report.fn++;
    if (pred == 0 && truth == 0) report.tn++;
  }
  report.n_test = static_cast<std::int64_t>(test.size());
  report.accuracy = static_cast<double>(report.tp + report.tn) /
                    static_cast<double>(report.n_test);
  return report;
}

LooReport leave_one_attack_out(const std::vector<SampleRecord>& records,
                               const std::vector<std::string>& feature_set,
                               const std::string& label,
                               const ForestHyperparams& hp, int n_jobs) {
  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t i = 0; i < records.size(); ++i) {
    families[records[i].attack_family].push_back(i);
  }
  if (families.size() < 2) {
    throw DegenerateInput("leave_one_attack_out: need >= 2 attack families");
  }

  LooReport out;
  for (const auto& [family, member_idx] : families) {
    std::vector<SampleRecord> train_part;
    std::vector<SampleRecord> test_part;
    train_part.reserve(records.size() - member_idx.size());
    test_part.reserve(member_idx.size());
    for (const SampleRecord& r : records) {
      (r.attack_family == family ? test_part : train_part).push_back(r);
    }
    bool saw0 = false, saw1 = false;
    for (const SampleRecord& r : train_part) {
      const auto it = r.labels.find(label);
      if (it != r.labels.end()) (it->second == 0 ? saw0 : saw1) = true;
    }
    if (!saw0 || !saw1) {
      throw DegenerateInput("leave_one_attack_out: training complement of '" +
                            family + "' has a single class");
    }
    const ForestModel model =
        train_forest(train_part, feature_set, label, hp, n_jobs);
    out.per_attack[family] = evaluate(model, test_part, label);
  }
  return out;
}

std::vector<std::pair<std::string, double>> rank_features(
    const ForestModel& model) {
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(model.feature_names().size());
  for (std::size_t f = 0; f < model.feature_names().size(); ++f) {
    ranked.emplace_back(model.feature_names()[f], model.importances()[f]);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

namespace {

json node_to_json(const TreeNode& n) {
  if (n.is_leaf()) {
    return json{{"n0", n.count0}, {"n1", n.count1}};
  }
  return json{{"f", n.feature_index},
              {"t", n.threshold},
              {"l", n.left},
              {"r", n.right}};
}

TreeNode node_from_json(const json& j) {
  TreeNode n;
  if (j.contains("f")) {
    n.feature_index = j.at("f").get<std::int32_t>();
    n.threshold = j.at("t").get<double>();
    n.left = j.at("l").get<std::int32_t>();
    n.right = j.at("r").get<std::int32_t>();
  } else {
    n.count0 = j.at("n0").get<std::int64_t>();
    n.count1 = j.at("n1").get<std::int64_t>();
  }
  return n;
}

}  // namespace

std::string ForestModel::to_json_string() const {
  json doc;
  doc["format"] = "advmetrics-forest";
  doc["version"] = 1;
  doc["hyperparams"] = {{"n_trees", hp_.n_trees},
                        {"max_depth", hp_.max_depth},
                        {"min_samples_split", hp_.min_samples_split},
                        {"features_per_split", hp_.features_per_split},
                        {"seed", hp_.seed}};
  doc["feature_names"] = feature_names_;
  doc["importances"] = importances_;
  json trees = json::array();
  for (const DecisionTree& t : trees_) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) nodes.push_back(node_to_json(n));
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2);
}

ForestModel ForestModel::from_json_string(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "advmetrics-forest") {
      throw ParseError("model: unrecognized format tag");
    }
    ForestHyperparams hp;
    const json& h = doc.at("hyperparams");
    hp.n_trees = h.at("n_trees").get<int>();
    hp.max_depth = h.at("max_depth").get<int>();
    hp.min_samples_split = h.at("min_samples_split").get<int>();
    hp.features_per_split = h.at("features_per_split").get<int>();
    hp.seed = h.at("seed").get<std::uint64_t>();

    auto names = doc.at("feature_names").get<std::vector<std::string>>();
    auto importances = doc.at("importances").get<std::vector<double>>();
    if (importances.size() != names.size()) {
      throw ParseError("model: importances/feature_names size mismatch");
    }
    std::vector<DecisionTree> trees;
    for (const json& jt : doc.at("trees")) {
      DecisionTree t;
      for (const json& jn : jt.at("nodes")) t.nodes.push_back(node_from_json(jn));
      if (t.nodes.empty()) throw ParseError("model: tree with no nodes");
      const auto n_nodes = static_cast<std::int32_t>(t.nodes.size());
      for (const TreeNode& node : t.nodes) {
        if (node.is_leaf()) {
          if (node.count0 + node.count1 < 1) {
            throw ParseError("model: leaf with empty counts");
          }
        } else if (node.feature_index < 0 ||
                   node.feature_index >=
                       static_cast<std::int32_t>(names.size()) ||
                   node.left <= 0 || node.left >= n_nodes || node.right <= 0 ||
                   node.right >= n_nodes) {
          throw ParseError("model: node references out of range");
        }
      }
      trees.push_back(std::move(t));
    }
    return ForestModel(hp, std::move(names), std::move(trees),
                       std::move(importances));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: malformed document: ") + e.what());
  }
}

void ForestModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("model: cannot write '" + path.string() + "'");
  out << to_json_string() << '\n';
  if (!out) throw IoError("model: write to '" + path.string() + "' failed");
}

ForestModel ForestModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("model: cannot read '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace advmetrics
