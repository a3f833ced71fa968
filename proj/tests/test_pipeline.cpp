#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "advmetrics/csv.hpp"
#include "advmetrics/pipeline.hpp"
#include "advmetrics/png_io.hpp"
#include "test_support.hpp"

using namespace advmetrics;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(ADVMETRICS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

/// Two-sided synthetic dataset with an l2 gap around 300, learnable by
/// construction with the l2 (or any monotone-in-l2) feature.
SynthOptions gap_dataset_options(std::uint64_t seed) {
  SynthOptions options;
  options.n_per_family = 40;
  options.base = BaseImageKind::noise;
  options.seed = seed;
  options.families.push_back(
      {"weak", PerturbationFamily::gaussian, 1.0, 4.0, 1});
  options.families.push_back(
      {"strong", PerturbationFamily::gaussian, 8.0, 16.0, 1});
  options.oracles.push_back({"det", {"l2", 300.0, 0.0}});
  return options;
}

}  // namespace

TEST_CASE("feature selection groups") {
  CHECK(parse_feature_selection("all").size() == 12);
  CHECK(parse_feature_selection("norms") ==
        std::vector<std::string>{"l0", "l1", "l2", "linf"});
  CHECK(parse_feature_selection("quality").size() == 8);
  CHECK(parse_feature_selection("mse, psnrb") ==
        std::vector<std::string>{"mse", "psnrb"});
  CHECK_THROWS_AS(parse_feature_selection("ssim"), Error);
  CHECK_THROWS_AS(parse_feature_selection("mse,mse"), Error);
  CHECK_THROWS_AS(parse_feature_selection(""), Error);
}

TEST_CASE("manifest and metric matrix round-trip through CSV") {
  const fs::path dir = fresh_dir("advm_io");

  std::vector<ManifestRow> manifest;
  for (int i = 0; i < 3; ++i) {
    ManifestRow row;
    row.pair_id = "p" + std::to_string(i);
    row.original_path = row.pair_id + "_orig.png";
    row.adversarial_path = row.pair_id + "_adv.png";
    row.attack_family = "fam";
    row.config_id = "c";
    row.labels["magnet"] = i % 2;
    row.labels["squeezer"] = 1;
    manifest.push_back(row);
  }
  write_manifest(dir / "manifest.csv", manifest);
  const auto back = read_manifest(dir / "manifest.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].pair_id == "p1");
  CHECK(back[1].labels.at("magnet") == 1);
  CHECK(back[1].labels.at("squeezer") == 1);

  std::vector<MetricMatrixRow> matrix;
  for (int i = 0; i < 2; ++i) {
    MetricMatrixRow row;
    row.pair_id = "p" + std::to_string(i);
    row.attack_family = "fam";
    row.config_id = "c";
    for (const std::string& m : metric_names()) {
      row.metrics[m] = 0.1 * static_cast<double>(i + 1);
    }
    row.labels["det"] = i;
    matrix.push_back(row);
  }
  write_metric_matrix(dir / "matrix.csv", matrix);
  const auto mback = read_metric_matrix(dir / "matrix.csv");
  REQUIRE(mback.size() == 2);
  CHECK(mback[0].metrics.at("vifp") == 0.1);
  CHECK(mback[1].labels.at("det") == 1);

  fs::remove_all(dir);
}

TEST_CASE("synth writes a deterministic labeled dataset") {
  const fs::path dir_a = fresh_dir("advm_synth_a");
  const fs::path dir_b = fresh_dir("advm_synth_b");

  SynthOptions options = gap_dataset_options(5);
  options.n_per_family = 10;
  const auto rows_a = cmd_synth(dir_a, options);
  const auto rows_b = cmd_synth(dir_b, options);
  CHECK(rows_a.size() == 20);

  CHECK(slurp(dir_a / "manifest.csv") == slurp(dir_b / "manifest.csv"));
  for (const ManifestRow& row : rows_a) {
    CHECK(fs::exists(dir_a / row.original_path));
    CHECK(slurp(dir_a / row.adversarial_path) ==
          slurp(dir_b / row.adversarial_path));
  }

  // oracle with zero flip noise straddling the gap: both classes present
  int ones = 0;
  for (const ManifestRow& row : rows_a) ones += row.labels.at("det");
  CHECK(ones == 10);  // exactly the strong family

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("metrics command computes identity rows and is jobs-invariant") {
  const fs::path dir = fresh_dir("advm_metrics");

  // three identical pairs
  std::vector<ManifestRow> manifest;
  for (int i = 0; i < 3; ++i) {
    const ImageTensor img = testsupport::random_image(32, 32, 3, 40 + i);
    const std::string stem = "pair" + std::to_string(i);
    save_png(img, dir / (stem + ".png"));
    ManifestRow row;
    row.pair_id = stem;
    row.original_path = stem + ".png";
    row.adversarial_path = stem + ".png";
    row.attack_family = "identity";
    row.config_id = "c";
    row.labels["det"] = 0;
    manifest.push_back(row);
  }
  write_manifest(dir / "manifest.csv", manifest);

  MetricsOptions options;
  cmd_metrics(dir / "manifest.csv", dir / "matrix1.csv", options);
  options.jobs = 8;
  cmd_metrics(dir / "manifest.csv", dir / "matrix8.csv", options);
  CHECK(slurp(dir / "matrix1.csv") == slurp(dir / "matrix8.csv"));

  const auto rows = read_metric_matrix(dir / "matrix1.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.metrics.at("l0") == 0.0);
    CHECK(row.metrics.at("l1") == 0.0);
    CHECK(row.metrics.at("l2") == 0.0);
    CHECK(row.metrics.at("linf") == 0.0);
    CHECK(row.metrics.at("mse") == 0.0);
    CHECK(row.metrics.at("ergas") == 0.0);
    CHECK(row.metrics.at("rase") == 0.0);
    CHECK(row.metrics.at("sam") == 0.0);
    CHECK(row.metrics.at("uqi") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(row.metrics.at("scc") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::fabs(row.metrics.at("vifp") - 1.0) <= 1e-6);
    CHECK(row.metrics.at("psnrb") == 100.0);  // capped sentinel
  }

  fs::remove_all(dir);
}

TEST_CASE("metrics command aborts on bad rows without partial output") {
  const fs::path dir = fresh_dir("advm_metrics_bad");
  const ImageTensor img = testsupport::random_image(32, 32, 3, 1);
  save_png(img, dir / "ok.png");

  std::vector<ManifestRow> manifest;
  ManifestRow good;
  good.pair_id = "good";
  good.original_path = "ok.png";
  good.adversarial_path = "ok.png";
  good.attack_family = "f";
  good.config_id = "c";
  good.labels["det"] = 0;
  ManifestRow bad = good;
  bad.pair_id = "bad";
  bad.adversarial_path = "missing.png";
  manifest.push_back(good);
  manifest.push_back(bad);
  write_manifest(dir / "manifest.csv", manifest);

  MetricsOptions options;
  CHECK_THROWS_WITH_AS(
      cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", options),
      doctest::Contains("bad"), Error);
  CHECK(!fs::exists(dir / "matrix.csv"));

  // duplicate ids are rejected up front
  manifest[1] = good;
  write_manifest(dir / "manifest.csv", manifest);
  CHECK_THROWS_AS(cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", options),
                  Error);

  fs::remove_all(dir);
}

TEST_CASE("corr finds the generating metric and flags degenerates") {
  const fs::path dir = fresh_dir("advm_corr");

  // varied-brightness bases plus mixed perturbation geometry decouple the
  // other metrics from l2, whose thresholding generates the label
  const fs::path base_dir = fresh_dir("advm_corr_bases");
  for (int i = 0; i < 40; ++i) {
    RngStream s(900 + static_cast<std::uint64_t>(i));
    const double center = s.uniform(60.0, 200.0);
    const double half = s.uniform(15.0, 55.0);
    Eigen::ArrayXd v(32 * 32 * 3);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      v[k] = std::clamp(center + s.uniform(-half, half), 0.0, 255.0);
    }
    save_png(ImageTensor(32, 32, 3, v),
             base_dir / ("b" + std::to_string(i) + ".png"));
  }

  SynthOptions options;
  options.n_per_family = 60;
  options.base = BaseImageKind::directory;
  options.base_dir = base_dir;
  options.seed = 9;
  options.families.push_back(
      {"g", PerturbationFamily::gaussian, 2.7, 9.4, 1});
  options.families.push_back(
      {"u", PerturbationFamily::uniform_linf, 4.7, 16.3, 1});
  options.families.push_back(
      {"s", PerturbationFamily::sparse_pixels, 27.0, 95.0, 30});
  options.oracles.push_back({"det", {"l2", 260.0, 0.0}});
  cmd_synth(dir, options);

  MetricsOptions moptions;
  moptions.jobs = 4;
  cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", moptions);

  const auto table = cmd_corr(dir / "matrix.csv", "det");
  REQUIRE(table.size() == 12);
  double l2_abs = 0.0;
  double best_other = 0.0;
  for (const CorrEntry& entry : table) {
    REQUIRE(entry.r.has_value());
    const double a = std::fabs(*entry.r);
    if (entry.metric == "l2") {
      l2_abs = a;
    } else {
      best_other = std::max(best_other, a);
    }
  }
  CHECK(l2_abs > best_other);

  CHECK_THROWS_AS(cmd_corr(dir / "matrix.csv", "nonexistent"), UnknownLabel);

  // constant label column: every metric degenerate
  auto rows = read_metric_matrix(dir / "matrix.csv");
  for (auto& row : rows) row.labels["det"] = 1;
  write_metric_matrix(dir / "allone.csv", rows);
  for (const CorrEntry& entry : cmd_corr(dir / "allone.csv", "det")) {
    CHECK(!entry.r.has_value());
  }

  // constant metric column: that row degenerate
  for (auto& row : rows) {
    row.labels["det"] = row.pair_id.front() == 'g' ? 1 : 0;
    row.metrics["linf"] = 3.0;
  }
  write_metric_matrix(dir / "flatlinf.csv", rows);
  for (const CorrEntry& entry : cmd_corr(dir / "flatlinf.csv", "det")) {
    if (entry.metric == "linf") {
      CHECK(!entry.r.has_value());
    }
  }

  fs::remove_all(dir);
  fs::remove_all(base_dir);
}

TEST_CASE("train command learns the gap dataset and is reproducible") {
  const fs::path dir = fresh_dir("advm_train");

  cmd_synth(dir, gap_dataset_options(31));
  MetricsOptions moptions;
  moptions.jobs = 4;
  cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", moptions);

  TrainOptions toptions;
  toptions.hp.seed = 1;
  toptions.jobs = 4;
  const TrainResult all = cmd_train(dir / "matrix.csv", "det", toptions,
                                    dir / "model_a.json");
  CHECK(all.report.accuracy >= 0.98);
  CHECK(all.n_train + all.report.n_test == 80);

  TrainOptions single = toptions;
  single.features = "l2";
  const TrainResult l2_only =
      cmd_train(dir / "matrix.csv", "det", single, std::nullopt);
  CHECK(l2_only.report.accuracy >= 0.98);

  const TrainResult again = cmd_train(dir / "matrix.csv", "det", toptions,
                                      dir / "model_b.json");
  CHECK(again.report.accuracy == all.report.accuracy);
  CHECK(again.report.tp == all.report.tp);
  CHECK(slurp(dir / "model_a.json") == slurp(dir / "model_b.json"));

  const auto ranked = cmd_importance(dir / "model_a.json");
  REQUIRE(ranked.size() == 12);
  double sum = 0.0;
  for (const auto& [name, importance] : ranked) sum += importance;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::is_sorted(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) {
                         return a.second > b.second;
                       }));

  fs::remove_all(dir);
}

TEST_CASE("a 500+ sample noiseless dataset is learnable to 0.98") {
  const fs::path dir = fresh_dir("advm_learnable");
  SynthOptions options = gap_dataset_options(2025);
  options.n_per_family = 260;
  cmd_synth(dir, options);
  MetricsOptions moptions;
  moptions.jobs = 8;
  cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", moptions);

  TrainOptions toptions;
  toptions.hp.seed = 6;
  toptions.jobs = 8;
  const TrainResult result =
      cmd_train(dir / "matrix.csv", "det", toptions, std::nullopt);
  CHECK(result.n_train + result.report.n_test == 520);
  CHECK(result.report.accuracy >= 0.98);

  fs::remove_all(dir);
}

TEST_CASE("loo command reports one row per family") {
  const fs::path dir = fresh_dir("advm_loo");

  // every family straddles the threshold so no training complement is
  // one-class
  SynthOptions options;
  options.n_per_family = 25;
  options.base = BaseImageKind::noise;
  options.seed = 77;
  options.families.push_back(
      {"twin_a", PerturbationFamily::gaussian, 2.0, 10.0, 1});
  options.families.push_back(
      {"twin_b", PerturbationFamily::gaussian, 2.0, 10.0, 1});
  options.families.push_back(
      {"third", PerturbationFamily::sparse_pixels, 20.0, 60.0, 60});
  options.oracles.push_back({"det", {"l2", 300.0, 0.0}});
  cmd_synth(dir, options);
  MetricsOptions moptions;
  moptions.jobs = 4;
  cmd_metrics(dir / "manifest.csv", dir / "matrix.csv", moptions);

  TrainOptions toptions;
  toptions.hp.seed = 2;
  toptions.jobs = 4;
  const LooReport report = cmd_loo(dir / "matrix.csv", "det", toptions);
  CHECK(report.per_attack.size() == 3);
  CHECK(report.per_attack.count("twin_a") == 1);
  CHECK(report.per_attack.count("twin_b") == 1);
  CHECK(report.per_attack.count("third") == 1);
  CHECK(report.per_attack.at("third").n_test == 25);

  fs::remove_all(dir);
}

TEST_CASE("cli exit codes: 0 success, 1 usage, 2 data error") {
  const fs::path dir = fresh_dir("advm_cli");

  CHECK(run_cli("") == 1);                      // missing subcommand
  CHECK(run_cli("metrics --bogus x") == 1);     // unknown flag
  CHECK(run_cli("corr --matrix /nonexistent.csv --label det") == 2);
  CHECK(run_cli("--help") == 0);

  const std::string synth_args =
      "synth --out " + dir.string() +
      " --n 10 --base noise --seed 4"
      " --family a=gaussian:1:10 --family b=gaussian:1:10"
      " --oracle det:l2:300:0";
  CHECK(run_cli(synth_args) == 0);
  CHECK(run_cli("metrics --manifest " + (dir / "manifest.csv").string() +
                " --out " + (dir / "matrix.csv").string() + " --jobs 2") == 0);
  CHECK(run_cli("corr --matrix " + (dir / "matrix.csv").string() +
                " --label det") == 0);
  CHECK(run_cli("train --matrix " + (dir / "matrix.csv").string() +
                " --label det --seed 3 --trees 30 --model-out " +
                (dir / "model.json").string()) == 0);
  CHECK(run_cli("importance --model " + (dir / "model.json").string()) == 0);
  CHECK(run_cli("loo --matrix " + (dir / "matrix.csv").string() +
                " --label det --trees 30") == 0);
  CHECK(run_cli("train --matrix " + (dir / "matrix.csv").string() +
                " --label missing") == 2);

  fs::remove_all(dir);
}
