// Command-line front end: synthesize datasets, measure perturbations,
// correlate metrics with detector labels, and train/evaluate the forest.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advmetrics/csv.hpp"
#include "advmetrics/pipeline.hpp"

namespace {

using advmetrics::TrainOptions;

void print_eval_report(const advmetrics::EvalReport& report,
                       const std::string& label, std::int64_t n_train) {
  std::printf("label: %s\n", label.c_str());
  std::printf("features:");
  for (const std::string& f : report.feature_set) std::printf(" %s", f.c_str());
  std::printf("\n");
  std::printf("n_train: %lld  n_test: %lld\n",
              static_cast<long long>(n_train),
              static_cast<long long>(report.n_test));
  std::printf("accuracy: %.4f\n", report.accuracy);
  std::printf("confusion: tp=%lld fp=%lld fn=%lld tn=%lld\n",
              static_cast<long long>(report.tp),
              static_cast<long long>(report.fp),
              static_cast<long long>(report.fn),
              static_cast<long long>(report.tn));
}

advmetrics::FamilySpec parse_family_flag(const std::string& arg) {
  // [name=]kind:maglo:maghi[:count]
  advmetrics::FamilySpec family;
  std::string body = arg;
  const auto eq = body.find('=');
  if (eq != std::string::npos) {
    family.name = body.substr(0, eq);
    body = body.substr(eq + 1);
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = body.find(':', start);
    parts.push_back(body.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() < 3 || parts.size() > 4) {
    throw CLI::ValidationError(
        "--family", "expected [name=]kind:maglo:maghi[:count], got '" + arg +
                        "'");
  }
  family.kind = advmetrics::parse_perturbation_family(parts[0]);
  if (family.name.empty()) family.name = parts[0];
  family.magnitude_lo = advmetrics::csv::parse_double(parts[1]);
  family.magnitude_hi = advmetrics::csv::parse_double(parts[2]);
  if (parts.size() == 4) {
    family.count = advmetrics::csv::parse_int(parts[3]);
  }
  return family;
}

advmetrics::NamedOracle parse_oracle_flag(const std::string& arg) {
  // name:metric:threshold[:flip_noise]
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = arg.find(':', start);
    parts.push_back(arg.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() < 3 || parts.size() > 4) {
    throw CLI::ValidationError(
        "--oracle",
        "expected name:metric:threshold[:flip_noise], got '" + arg + "'");
  }
  advmetrics::NamedOracle oracle;
  oracle.name = parts[0];
  oracle.spec.metric = parts[1];
  oracle.spec.threshold = advmetrics::csv::parse_double(parts[2]);
  if (parts.size() == 4) {
    oracle.spec.flip_noise = advmetrics::csv::parse_double(parts[3]);
  }
  return oracle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial perturbation metrics and detector-verdict "
               "prediction toolkit"};
  app.require_subcommand(1);

  // metrics
  auto* metrics_cmd = app.add_subcommand(
      "metrics", "Compute the 12 metrics for every pair in a manifest");
  std::string metrics_manifest, metrics_out;
  advmetrics::MetricsOptions metrics_options;
  metrics_cmd->add_option("--manifest", metrics_manifest, "Manifest CSV path")
      ->required();
  metrics_cmd->add_option("--out", metrics_out, "Metric matrix CSV to write")
      ->required();
  metrics_cmd->add_option("--jobs", metrics_options.jobs, "Worker threads");
  metrics_cmd->add_option("--l0-tolerance", metrics_options.l0_tolerance,
                          "Absolute difference below which a coordinate "
                          "counts as unchanged for l0");
  metrics_cmd->add_option("--uqi-window", metrics_options.quality.uqi_window);
  metrics_cmd->add_option("--ergas-ratio", metrics_options.quality.ergas_ratio);
  metrics_cmd->add_option("--vifp-scales", metrics_options.quality.vifp_scales);
  metrics_cmd->add_option("--vifp-sigma-nsq",
                          metrics_options.quality.vifp_sigma_nsq);
  metrics_cmd->add_option("--psnrb-block", metrics_options.quality.psnrb_block);
  metrics_cmd->add_option("--psnrb-cap", metrics_options.quality.psnrb_cap_db);

  // corr
  auto* corr_cmd = app.add_subcommand(
      "corr", "Pearson correlation of each metric against a detector label");
  std::string corr_matrix, corr_label;
  corr_cmd->add_option("--matrix", corr_matrix, "Metric matrix CSV")
      ->required();
  corr_cmd->add_option("--label", corr_label, "Detector name")->required();

  // train
  auto* train_cmd = app.add_subcommand(
      "train", "Train a random forest to predict a detector label");
  std::string train_matrix, train_label, train_model_out;
  TrainOptions train_options;
  train_cmd->add_option("--matrix", train_matrix, "Metric matrix CSV")
      ->required();
  train_cmd->add_option("--label", train_label, "Detector name")->required();
  train_cmd->add_option("--features", train_options.features,
                        "norms | quality | all | comma-separated list");
  train_cmd->add_option("--train-fraction", train_options.train_fraction);
  train_cmd->add_flag_function(
      "--no-stratify",
      [&](std::int64_t) { train_options.stratified = false; },
      "Plain shuffled split instead of per-class stratification");
  train_cmd->add_option("--seed", train_options.hp.seed);
  train_cmd->add_option("--trees", train_options.hp.n_trees);
  train_cmd->add_option("--max-depth", train_options.hp.max_depth,
                        "0 = unlimited");
  train_cmd->add_option("--min-samples-split",
                        train_options.hp.min_samples_split);
  train_cmd->add_option("--features-per-split",
                        train_options.hp.features_per_split,
                        "0 = floor(sqrt(feature count))");
  train_cmd->add_option("--jobs", train_options.jobs);
  train_cmd->add_option("--model-out", train_model_out, "Model file to write");

  // loo
  auto* loo_cmd = app.add_subcommand(
      "loo", "Leave-one-attack-out accuracy per attack family");
  std::string loo_matrix;
  std::vector<std::string> loo_labels;
  TrainOptions loo_options;
  loo_cmd->add_option("--matrix", loo_matrix, "Metric matrix CSV")->required();
  loo_cmd->add_option("--label", loo_labels,
                      "Detector name (repeat for several columns)");
  loo_cmd->add_option("--features", loo_options.features);
  loo_cmd->add_option("--seed", loo_options.hp.seed);
  loo_cmd->add_option("--trees", loo_options.hp.n_trees);
  loo_cmd->add_option("--max-depth", loo_options.hp.max_depth);
  loo_cmd->add_option("--min-samples-split", loo_options.hp.min_samples_split);
  loo_cmd->add_option("--features-per-split",
                      loo_options.hp.features_per_split);
  loo_cmd->add_option("--jobs", loo_options.jobs);

  // importance
  auto* imp_cmd = app.add_subcommand(
      "importance", "Ranked feature importances of a saved model");
  std::string imp_model;
  imp_cmd->add_option("--model", imp_model, "Model file")->required();

  // synth
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate a synthetic labeled dataset of image pairs");
  std::string synth_out, synth_base = "flat", synth_base_dir;
  std::vector<std::string> synth_families, synth_oracles;
  advmetrics::SynthOptions synth_options;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", synth_options.n_per_family,
                        "Pairs per family");
  synth_cmd->add_option("--height", synth_options.height);
  synth_cmd->add_option("--width", synth_options.width);
  synth_cmd->add_option("--channels", synth_options.channels)
      ->check(CLI::IsMember({1, 3}));
  synth_cmd
      ->add_option("--family", synth_families,
                   "[name=]kind:maglo:maghi[:count]; kinds: uniform_linf, "
                   "gaussian, sparse_pixels, block_patch")
      ->required();
  synth_cmd
      ->add_option("--oracle", synth_oracles,
                   "name:metric:threshold[:flip_noise]")
      ->required();
  synth_cmd->add_option("--base", synth_base,
                        "Original images: flat (mid-gray) or noise")
      ->check(CLI::IsMember({"flat", "noise"}));
  synth_cmd->add_option("--base-dir", synth_base_dir,
                        "Directory of PNGs to use as originals");
  synth_cmd->add_option("--seed", synth_options.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*metrics_cmd) {
      advmetrics::cmd_metrics(metrics_manifest, metrics_out, metrics_options);
      std::printf("wrote %s\n", metrics_out.c_str());
    } else if (*corr_cmd) {
      const auto table = advmetrics::cmd_corr(corr_matrix, corr_label);
      std::printf("%-8s %s\n", "metric", "pearson_r");
      for (const auto& entry : table) {
        if (entry.r) {
          std::printf("%-8s %+.6f\n", entry.metric.c_str(), *entry.r);
        } else {
          std::printf("%-8s degenerate\n", entry.metric.c_str());
        }
      }
    } else if (*train_cmd) {
      std::optional<std::filesystem::path> model_out;
      if (!train_model_out.empty()) model_out = train_model_out;
      const auto result =
          advmetrics::cmd_train(train_matrix, train_label, train_options,
                                model_out);
      print_eval_report(result.report, train_label, result.n_train);
      if (model_out) std::printf("model: %s\n", model_out->c_str());
    } else if (*loo_cmd) {
      if (loo_labels.empty()) {
        throw advmetrics::Error("loo: at least one --label is required");
      }
      std::vector<advmetrics::LooReport> reports;
      for (const std::string& label : loo_labels) {
        reports.push_back(
            advmetrics::cmd_loo(loo_matrix, label, loo_options));
      }
      std::printf("%-16s", "unknown_attack");
      for (const std::string& label : loo_labels) {
        std::printf(" %12s", label.c_str());
      }
      std::printf("\n");
      for (const auto& [family, first_report] : reports[0].per_attack) {
        std::printf("%-16s", family.c_str());
        for (const auto& report : reports) {
          std::printf(" %12.4f", report.per_attack.at(family).accuracy);
        }
        std::printf("\n");
      }
    } else if (*imp_cmd) {
      const auto ranked = advmetrics::cmd_importance(imp_model);
      std::printf("%-8s %s\n", "feature", "importance");
      for (const auto& [name, importance] : ranked) {
        std::printf("%-8s %.6f\n", name.c_str(), importance);
      }
    } else if (*synth_cmd) {
      for (const std::string& arg : synth_families) {
        synth_options.families.push_back(parse_family_flag(arg));
      }
      for (const std::string& arg : synth_oracles) {
        synth_options.oracles.push_back(parse_oracle_flag(arg));
      }
      if (!synth_base_dir.empty()) {
        synth_options.base = advmetrics::BaseImageKind::directory;
        synth_options.base_dir = synth_base_dir;
      } else if (synth_base == "noise") {
        synth_options.base = advmetrics::BaseImageKind::noise;
      }
      const auto rows = advmetrics::cmd_synth(synth_out, synth_options);
      std::printf("wrote %zu pairs under %s\n", rows.size(),
                  synth_out.c_str());
    }
  } catch (const advmetrics::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}
