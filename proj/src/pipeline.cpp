#include "advmetrics/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "advmetrics/csv.hpp"
#include "advmetrics/norms.hpp"
#include "advmetrics/png_io.hpp"
#include "advmetrics/rng.hpp"

namespace advmetrics {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "l0",  "l1",   "l2",  "linf", "mse",  "uqi",
      "ergas", "sam", "scc", "rase", "vifp", "psnrb"};
  return names;
}

const std::vector<std::string>& norm_feature_names() {
  static const std::vector<std::string> names = {"l0", "l1", "l2", "linf"};
  return names;
}

const std::vector<std::string>& quality_feature_names() {
  static const std::vector<std::string> names = {
      "mse", "uqi", "ergas", "sam", "scc", "rase", "vifp", "psnrb"};
  return names;
}

std::vector<std::string> parse_feature_selection(const std::string& spec) {
  if (spec == "all") return metric_names();
  if (spec == "norms") return norm_feature_names();
  if (spec == "quality") return quality_feature_names();

  std::vector<std::string> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // trim spaces around each name
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    const auto& known = metric_names();
    if (std::find(known.begin(), known.end(), item) == known.end()) {
      throw Error("unknown feature '" + item + "'");
    }
    if (std::find(out.begin(), out.end(), item) != out.end()) {
      throw Error("duplicate feature '" + item + "'");
    }
    out.push_back(item);
  }
  if (out.empty()) {
    throw Error("feature selection '" + spec + "' names no features");
  }
  return out;
}

namespace {

constexpr const char* kLabelPrefix = "label_";

std::vector<std::string> label_columns(const csv::Table& table) {
  std::vector<std::string> names;
  for (const std::string& col : table.header) {
    if (col.rfind(kLabelPrefix, 0) == 0) {
      names.push_back(col.substr(std::string(kLabelPrefix).size()));
    }
  }
  return names;
}

int parse_label_cell(const std::string& cell, const std::string& column) {
  const int v = csv::parse_int(cell);
  if (v != 0 && v != 1) {
    throw ParseError("column '" + column + "': label must be 0 or 1, got '" +
                     cell + "'");
  }
  return v;
}

std::vector<std::string> sorted_label_names(
    const std::map<std::string, int>& labels) {
  std::vector<std::string> names;
  names.reserve(labels.size());
  for (const auto& [name, value] : labels) names.push_back(name);
  return names;  // std::map iterates sorted
}

}  // namespace

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t c_id = table.column("pair_id");
  const std::size_t c_orig = table.column("original_path");
  const std::size_t c_adv = table.column("adversarial_path");
  const std::size_t c_family = table.column("attack_family");
  const std::size_t c_config = table.column("config_id");
  const std::vector<std::string> detectors = label_columns(table);
  if (detectors.empty()) {
    throw FormatError("manifest '" + path.string() +
                      "' has no label_<detector> column");
  }

  std::vector<ManifestRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& record : table.rows) {
    ManifestRow row;
    row.pair_id = record[c_id];
    row.original_path = record[c_orig];
    row.adversarial_path = record[c_adv];
    row.attack_family = record[c_family];
    row.config_id = record[c_config];
    for (const std::string& d : detectors) {
      const std::string col = kLabelPrefix + d;
      row.labels[d] = parse_label_cell(record[table.column(col)], col);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRow>& rows) {
  if (rows.empty()) throw Error("write_manifest: no rows");
  csv::Table table;
  table.header = {"pair_id", "original_path", "adversarial_path",
                  "attack_family", "config_id"};
  const std::vector<std::string> detectors = sorted_label_names(rows[0].labels);
  for (const std::string& d : detectors) {
    table.header.push_back(kLabelPrefix + d);
  }
  for (const ManifestRow& row : rows) {
    std::vector<std::string> record = {row.pair_id, row.original_path,
                                       row.adversarial_path,
                                       row.attack_family, row.config_id};
    for (const std::string& d : detectors) {
      record.push_back(std::to_string(row.labels.at(d)));
    }
    table.rows.push_back(std::move(record));
  }
  csv::write_file(path, table);
}

std::vector<MetricMatrixRow> read_metric_matrix(
    const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t c_id = table.column("pair_id");
  const std::size_t c_family = table.column("attack_family");
  const std::size_t c_config = table.column("config_id");
  std::vector<std::size_t> metric_cols;
  for (const std::string& m : metric_names()) {
    metric_cols.push_back(table.column(m));
  }
  const std::vector<std::string> detectors = label_columns(table);

  std::vector<MetricMatrixRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& record : table.rows) {
    MetricMatrixRow row;
    row.pair_id = record[c_id];
    row.attack_family = record[c_family];
    row.config_id = record[c_config];
    for (std::size_t i = 0; i < metric_cols.size(); ++i) {
      const double v = csv::parse_double(record[metric_cols[i]]);
      if (!std::isfinite(v)) {
        throw ParseError("metric '" + metric_names()[i] + "' of pair '" +
                         row.pair_id + "' is not finite");
      }
      row.metrics[metric_names()[i]] = v;
    }
    for (const std::string& d : detectors) {
      const std::string col = kLabelPrefix + d;
      row.labels[d] = parse_label_cell(record[table.column(col)], col);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metric_matrix(const std::filesystem::path& path,
                         const std::vector<MetricMatrixRow>& rows) {
  if (rows.empty()) throw Error("write_metric_matrix: no rows");
  csv::Table table;
  table.header = {"pair_id", "attack_family", "config_id"};
  for (const std::string& m : metric_names()) table.header.push_back(m);
  const std::vector<std::string> detectors = sorted_label_names(rows[0].labels);
  for (const std::string& d : detectors) {
    table.header.push_back(kLabelPrefix + d);
  }
  for (const MetricMatrixRow& row : rows) {
    std::vector<std::string> record = {row.pair_id, row.attack_family,
                                       row.config_id};
    for (const std::string& m : metric_names()) {
      record.push_back(csv::format_double(row.metrics.at(m)));
    }
    for (const std::string& d : detectors) {
      record.push_back(std::to_string(row.labels.at(d)));
    }
    table.rows.push_back(std::move(record));
  }
  csv::write_file(path, table);
}

SampleRecord to_sample_record(const MetricMatrixRow& row) {
  SampleRecord rec;
  rec.sample_id = row.pair_id;
  rec.attack_family = row.attack_family;
  rec.config_id = row.config_id;
  rec.features = row.metrics;
  rec.labels = row.labels;
  return rec;
}

std::vector<SampleRecord> to_sample_records(
    const std::vector<MetricMatrixRow>& rows) {
  std::vector<SampleRecord> records;
  records.reserve(rows.size());
  for (const MetricMatrixRow& row : rows) {
    records.push_back(to_sample_record(row));
  }
  return records;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base_dir,
                              const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

MetricMatrixRow compute_row(const ManifestRow& manifest_row,
                            const std::filesystem::path& base_dir,
                            const MetricsOptions& options) {
  const ImageTensor original =
      load_png(resolve(base_dir, manifest_row.original_path));
  const ImageTensor adversarial =
      load_png(resolve(base_dir, manifest_row.adversarial_path));
  const ImagePair pair(original, adversarial, manifest_row.pair_id);

  const NormQuadruple n = compute_norms(pair, options.l0_tolerance);
  const QualityVector q = quality_vector(pair, options.quality);

  MetricMatrixRow row;
  row.pair_id = manifest_row.pair_id;
  row.attack_family = manifest_row.attack_family;
  row.config_id = manifest_row.config_id;
  row.labels = manifest_row.labels;
  row.metrics["l0"] = n.l0;
  row.metrics["l1"] = n.l1;
  row.metrics["l2"] = n.l2;
  row.metrics["linf"] = n.linf;
  row.metrics["mse"] = q.mse;
  row.metrics["uqi"] = q.uqi;
  row.metrics["ergas"] = q.ergas;
  row.metrics["sam"] = q.sam;
  row.metrics["scc"] = q.scc;
  row.metrics["rase"] = q.rase;
  row.metrics["vifp"] = q.vifp;
  row.metrics["psnrb"] =
      std::isinf(q.psnrb) ? options.quality.psnrb_cap_db : q.psnrb;
  for (const auto& [name, value] : row.metrics) {
    if (!std::isfinite(value)) {
      throw DegenerateInput("metric '" + name + "' is not finite");
    }
  }
  return row;
}

}  // namespace

std::vector<MetricMatrixRow> compute_metric_matrix(
    const std::vector<ManifestRow>& manifest,
    const std::filesystem::path& base_dir, const MetricsOptions& options) {
  if (manifest.empty()) throw Error("metrics: manifest has no rows");
  {
    std::vector<std::string> ids;
    ids.reserve(manifest.size());
    for (const ManifestRow& row : manifest) ids.push_back(row.pair_id);
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) {
      throw Error("metrics: duplicate pair_id '" + *dup + "'");
    }
  }

  std::vector<MetricMatrixRow> rows(manifest.size());
  std::vector<std::pair<std::string, std::string>> failures;
  std::mutex failures_mutex;
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.size()) return;
      try {
        rows[i] = compute_row(manifest[i], base_dir, options);
      } catch (const std::exception& e) {
        const std::scoped_lock lock(failures_mutex);
        failures.emplace_back(manifest[i].pair_id, e.what());
      }
    }
  };

  const int jobs = std::max(options.jobs, 1);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    std::ostringstream msg;
    msg << "metrics: " << failures.size() << " row(s) failed:";
    for (const auto& [id, what] : failures) {
      msg << "\n  " << id << ": " << what;
    }
    throw Error(msg.str());
  }

  std::sort(rows.begin(), rows.end(),
            [](const MetricMatrixRow& a, const MetricMatrixRow& b) {
              return a.pair_id < b.pair_id;
            });
  return rows;
}

void cmd_metrics(const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_path,
                 const MetricsOptions& options) {
  const std::vector<ManifestRow> manifest = read_manifest(manifest_path);
  const std::vector<MetricMatrixRow> rows = compute_metric_matrix(
      manifest, std::filesystem::absolute(manifest_path).parent_path(),
      options);
  write_metric_matrix(out_path, rows);
}

std::vector<CorrEntry> correlation_table(
    const std::vector<MetricMatrixRow>& rows, const std::string& label) {
  if (rows.empty()) throw Error("corr: empty matrix");
  if (rows[0].labels.find(label) == rows[0].labels.end()) {
    throw UnknownLabel("corr: no detector label '" + label + "'");
  }
  std::vector<double> y;
  y.reserve(rows.size());
  for (const MetricMatrixRow& row : rows) {
    y.push_back(static_cast<double>(row.labels.at(label)));
  }
  std::vector<CorrEntry> table;
  for (const std::string& m : metric_names()) {
    std::vector<double> x;
    x.reserve(rows.size());
    for (const MetricMatrixRow& row : rows) x.push_back(row.metrics.at(m));
    CorrEntry entry{m, std::nullopt};
    try {
      entry.r = pearson(x, y);
    } catch (const DegenerateInput&) {
      // reported as degenerate
    }
    table.push_back(std::move(entry));
  }
  return table;
}

std::vector<CorrEntry> cmd_corr(const std::filesystem::path& matrix_path,
                                const std::string& label) {
  return correlation_table(read_metric_matrix(matrix_path), label);
}

TrainResult train_on_records(const std::vector<SampleRecord>& records,
                             const std::string& label,
                             const TrainOptions& options) {
  const std::vector<std::string> features =
      parse_feature_selection(options.features);
  auto [train_part, test_part] =
      options.stratified
          ? stratified_split(records, options.train_fraction, label,
                             options.hp.seed)
          : shuffle_split(records, options.train_fraction, options.hp.seed);
  TrainResult result;
  result.model =
      train_forest(train_part, features, label, options.hp, options.jobs);
  result.report = evaluate(result.model, test_part, label);
  result.n_train = static_cast<std::int64_t>(train_part.size());
  return result;
}

TrainResult cmd_train(const std::filesystem::path& matrix_path,
                      const std::string& label, const TrainOptions& options,
                      const std::optional<std::filesystem::path>& model_out) {
  const std::vector<SampleRecord> records =
      to_sample_records(read_metric_matrix(matrix_path));
  TrainResult result = train_on_records(records, label, options);
  if (model_out) {
    result.model.save(*model_out);
  }
  return result;
}

LooReport cmd_loo(const std::filesystem::path& matrix_path,
                  const std::string& label, const TrainOptions& options) {
  const std::vector<SampleRecord> records =
      to_sample_records(read_metric_matrix(matrix_path));
  return leave_one_attack_out(records,
                              parse_feature_selection(options.features), label,
                              options.hp, options.jobs);
}

std::vector<std::pair<std::string, double>> cmd_importance(
    const std::filesystem::path& model_path) {
  return rank_features(ForestModel::load(model_path));
}

namespace {

std::string zero_padded(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

std::vector<std::filesystem::path> list_pngs(
    const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw IoError("synth: no .png files under '" + dir.string() + "'");
  }
  return files;
}

std::string format_magnitude(double magnitude) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::fixed << magnitude;
  return ss.str();
}

}  // namespace

std::vector<ManifestRow> cmd_synth(const std::filesystem::path& out_dir,
                                   const SynthOptions& options) {
  if (options.families.empty()) throw Error("synth: no families given");
  if (options.oracles.empty()) throw Error("synth: no oracle detectors given");
  if (options.n_per_family < 1) throw Error("synth: n_per_family must be >= 1");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("synth: cannot create '" + out_dir.string() + "'");
  }

  std::vector<std::filesystem::path> base_files;
  if (options.base == BaseImageKind::directory) {
    base_files = list_pngs(options.base_dir);
  }

  std::vector<ManifestRow> rows;
  std::uint64_t sample_index = 0;
  for (const FamilySpec& family : options.families) {
    if (!(family.magnitude_hi >= family.magnitude_lo) ||
        family.magnitude_lo <= 0.0) {
      throw Error("synth: family '" + family.name +
                  "' has an invalid magnitude range");
    }
    for (int i = 0; i < options.n_per_family; ++i, ++sample_index) {
      RngStream stream = RngStream::derived(options.seed, sample_index);
      const double magnitude =
          family.magnitude_lo == family.magnitude_hi
              ? family.magnitude_lo
              : stream.uniform(family.magnitude_lo, family.magnitude_hi);
      const std::uint64_t base_seed = stream.next_u64();
      const std::uint64_t perturb_seed = stream.next_u64();
      const std::uint64_t label_seed = stream.next_u64();

      ImageTensor base = [&] {
        switch (options.base) {
          case BaseImageKind::flat_midgray:
            return ImageTensor::constant(options.height, options.width,
                                         options.channels, 128.0);
          case BaseImageKind::noise:
            return noise_image(options.height, options.width, options.channels,
                               base_seed);
          case BaseImageKind::directory:
          default:
            return load_png(base_files[sample_index % base_files.size()]);
        }
      }();

      const std::string pair_id =
          family.name + "-" + zero_padded(i, 4);
      PerturbationSpec spec;
      spec.family = family.kind;
      spec.magnitude = magnitude;
      spec.count = family.count;
      spec.seed = perturb_seed;
      const ImagePair raw = generate_pair(base, spec, pair_id);

      // Labels and files must agree exactly, so quantize first and compute
      // the oracle on what the PNGs will actually hold.
      const ImagePair stored(quantize_to_8bit(raw.original),
                             quantize_to_8bit(raw.adversarial), pair_id);

      ManifestRow row;
      row.pair_id = pair_id;
      row.original_path = pair_id + "_orig.png";
      row.adversarial_path = pair_id + "_adv.png";
      row.attack_family = family.name;
      row.config_id = perturbation_family_name(family.kind) + "-m" +
                      format_magnitude(magnitude);
      std::uint64_t oracle_index = 0;
      for (const NamedOracle& oracle : options.oracles) {
        row.labels[oracle.name] = oracle_label(
            stored, oracle.spec, options.quality,
            RngStream::derived(label_seed, oracle_index).next_u64(),
            options.l0_tolerance);
        ++oracle_index;
      }

      save_png(stored.original, out_dir / row.original_path);
      save_png(stored.adversarial, out_dir / row.adversarial_path);
      rows.push_back(std::move(row));
    }
  }

  write_manifest(out_dir / "manifest.csv", rows);
  return rows;
}

}  // namespace advmetrics
