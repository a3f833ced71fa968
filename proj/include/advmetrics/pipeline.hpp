#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advmetrics/datagen.hpp"
#include "advmetrics/forest.hpp"
#include "advmetrics/quality.hpp"

namespace advmetrics {

/// The 12 metric columns, in file order: the four L-norms followed by the
/// eight quality metrics.
const std::vector<std::string>& metric_names();

/// The four L-norm feature names.
const std::vector<std::string>& norm_feature_names();

/// The eight quality-metric feature names.
const std::vector<std::string>& quality_feature_names();

/// Resolve a feature selection: "norms", "quality", "all", or an explicit
/// comma-separated list of metric names.
std::vector<std::string> parse_feature_selection(const std::string& spec);

/// One line of a dataset manifest. Paths are stored as written; relative
/// paths are resolved against the manifest's directory when read back.
struct ManifestRow {
  std::string pair_id;
  std::string original_path;
  std::string adversarial_path;
  std::string attack_family;
  std::string config_id;
  std::map<std::string, int> labels;  ///< detector name -> {0, 1}
};

/// One line of the metric matrix: identity columns, the 12 metric values
/// (psnrb capped, everything finite), and the detector labels.
struct MetricMatrixRow {
  std::string pair_id;
  std::string attack_family;
  std::string config_id;
  std::map<std::string, double> metrics;
  std::map<std::string, int> labels;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRow>& rows);

std::vector<MetricMatrixRow> read_metric_matrix(
    const std::filesystem::path& path);
void write_metric_matrix(const std::filesystem::path& path,
                         const std::vector<MetricMatrixRow>& rows);

SampleRecord to_sample_record(const MetricMatrixRow& row);
std::vector<SampleRecord> to_sample_records(
    const std::vector<MetricMatrixRow>& rows);

struct MetricsOptions {
  int jobs = 1;
  double l0_tolerance = 0.0;
  QualityConfig quality;
};

/// Compute all 12 metrics for each manifest row. Image paths are resolved
/// against base_dir. Rows are returned sorted by pair_id regardless of the
/// worker count; any failing row aborts the whole computation with a
/// listing of every failure.
std::vector<MetricMatrixRow> compute_metric_matrix(
    const std::vector<ManifestRow>& manifest,
    const std::filesystem::path& base_dir, const MetricsOptions& options);

/// metrics subcommand: manifest in, metric-matrix CSV out. Nothing is
/// written when any row fails.
void cmd_metrics(const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_path,
                 const MetricsOptions& options);

/// One metric's correlation against a detector label; r is empty when the
/// series is degenerate (zero variance on either side).
struct CorrEntry {
  std::string metric;
  std::optional<double> r;
};

std::vector<CorrEntry> correlation_table(
    const std::vector<MetricMatrixRow>& rows, const std::string& label);

std::vector<CorrEntry> cmd_corr(const std::filesystem::path& matrix_path,
                                const std::string& label);

struct TrainOptions {
  std::string features = "all";
  double train_fraction = 0.66;
  bool stratified = true;
  ForestHyperparams hp;
  int jobs = 1;
};

struct TrainResult {
  EvalReport report;
  ForestModel model;
  std::int64_t n_train = 0;
};

TrainResult train_on_records(const std::vector<SampleRecord>& records,
                             const std::string& label,
                             const TrainOptions& options);

/// train subcommand: split, fit, evaluate on the held-out part, optionally
/// persist the model.
TrainResult cmd_train(const std::filesystem::path& matrix_path,
                      const std::string& label, const TrainOptions& options,
                      const std::optional<std::filesystem::path>& model_out);

LooReport cmd_loo(const std::filesystem::path& matrix_path,
                  const std::string& label, const TrainOptions& options);

std::vector<std::pair<std::string, double>> cmd_importance(
    const std::filesystem::path& model_path);

/// How cmd_synth chooses original images.
enum class BaseImageKind {
  flat_midgray,  ///< constant 128
  noise,         ///< per-sample seeded white noise
  directory,     ///< PNGs cycled from base_dir
};

/// One synthetic attack family: a perturbation kind plus the magnitude
/// range its samples are drawn from.
struct FamilySpec {
  std::string name;  ///< attack_family value in the manifest
  PerturbationFamily kind = PerturbationFamily::gaussian;
  double magnitude_lo = 1.0;
  double magnitude_hi = 1.0;
  int count = 1;  ///< sparse coordinates / block side
};

struct NamedOracle {
  std::string name;  ///< detector name, becomes column label_<name>
  OracleDetectorSpec spec;
};

struct SynthOptions {
  Eigen::Index height = 32;
  Eigen::Index width = 32;
  Eigen::Index channels = 3;
  int n_per_family = 250;
  std::vector<FamilySpec> families;
  std::vector<NamedOracle> oracles;
  BaseImageKind base = BaseImageKind::flat_midgray;
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  QualityConfig quality;
  double l0_tolerance = 0.0;
};

/// synth subcommand: write PNG pairs plus manifest.csv under out_dir.
/// Labels come from the oracles, computed on the 8-bit images exactly as
/// stored. Deterministic under options.seed. Returns the manifest rows.
std::vector<ManifestRow> cmd_synth(const std::filesystem::path& out_dir,
                                   const SynthOptions& options);

}  // namespace advmetrics
