#include "lelp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lelp/rng.hpp"

namespace lelp::data {

namespace {

// count split across bins: every bin gets at least one, the rest go
// proportionally with largest-remainder rounding (ties to lower index).
std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& bin_sizes,
                                           std::size_t count) {
  const std::size_t bins = bin_sizes.size();
  const std::size_t total = std::accumulate(bin_sizes.begin(), bin_sizes.end(), std::size_t{0});
  std::vector<std::size_t> quota(bins, 0);
  std::vector<double> frac(bins, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < bins; ++c) {
    const double share = static_cast<double>(count) * static_cast<double>(bin_sizes[c]) /
                         static_cast<double>(total);
    quota[c] = std::min(bin_sizes[c], static_cast<std::size_t>(share));
    if (quota[c] == 0 && bin_sizes[c] > 0) quota[c] = 1;  // keep every class present
    frac[c] = share - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned > count) {  // the min-one floor can overshoot tiny counts
    std::size_t arg = 0;
    for (std::size_t c = 1; c < bins; ++c)
      if (quota[c] > quota[arg]) arg = c;
    --quota[arg];
    --assigned;
  }
  while (assigned < count) {
    std::size_t arg = bins;
    double best = -1e300;
    for (std::size_t c = 0; c < bins; ++c) {
      if (quota[c] >= bin_sizes[c]) continue;
      if (frac[c] > best) {
        best = frac[c];
        arg = c;
      }
    }
    if (arg == bins) throw std::invalid_argument("stratified_quotas: count exceeds data size");
    ++quota[arg];
    frac[arg] -= 1.0;
    ++assigned;
  }
  return quota;
}

std::vector<std::size_t> stratified_pick(const LabeledDataset& dataset, std::size_t count,
                                         std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (count > n) throw std::invalid_argument("stratified sample: count exceeds dataset size");
  if (count < dataset.classes)
    throw std::invalid_argument("stratified sample: need at least one example per class");
  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(dataset.coarse_labels[i])].push_back(i);
  std::vector<std::size_t> sizes(dataset.classes);
  for (std::size_t c = 0; c < dataset.classes; ++c) sizes[c] = by_class[c].size();
  const std::vector<std::size_t> quota = stratified_quotas(sizes, count);

  std::vector<std::size_t> picked;
  picked.reserve(count);
  for (std::size_t c = 0; c < dataset.classes; ++c) {
    Rng rng(mix_seed(seed, "strata", c));
    std::vector<std::size_t> order = shuffled_indices(by_class[c].size(), rng);
    for (std::size_t k = 0; k < quota[c]; ++k) picked.push_back(by_class[c][order[k]]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

LabeledDataset take_rows(const LabeledDataset& dataset, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.features = Matrix(rows.size(), dataset.dim());
  out.coarse_labels.reserve(rows.size());
  out.classes = dataset.classes;
  out.fine_to_coarse = dataset.fine_to_coarse;
  out.split = dataset.split;
  if (dataset.has_fine()) out.fine_labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    std::copy(dataset.features.row(i).begin(), dataset.features.row(i).end(),
              out.features.row(r).begin());
    out.coarse_labels.push_back(dataset.coarse_labels[i]);
    if (dataset.has_fine()) out.fine_labels.push_back(dataset.fine_labels[i]);
  }
  return out;
}

void fill_split(LabeledDataset& out, std::size_t n, const SyntheticSpec& spec,
                const Matrix& centers, std::uint64_t stream_seed, const char* split_name) {
  // Round-robin over classes first, then subclusters within the class, so
  // per-class counts differ by at most one whatever n is.
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.classes;
    const std::size_t j = (i / spec.classes) % spec.subclusters_per_class;
    labels.push_back(static_cast<int>(c * spec.subclusters_per_class + j));
  }
  Rng rng(stream_seed);
  std::vector<std::size_t> order = shuffled_indices(n, rng);

  out.features = Matrix(n, spec.dim);
  out.coarse_labels.resize(n);
  out.fine_labels.resize(n);
  out.classes = spec.classes;
  out.split = split_name;
  for (std::size_t i = 0; i < n; ++i) {
    const int f = labels[order[i]];
    out.fine_labels[i] = f;
    out.coarse_labels[i] = f / static_cast<int>(spec.subclusters_per_class);
    for (std::size_t j = 0; j < spec.dim; ++j)
      out.features(i, j) = centers(static_cast<std::size_t>(f), j) + spec.noise_std * rng.normal();
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& column) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || s.empty())
    throw std::runtime_error("load_csv: non-numeric cell in column '" + column +
                             "' at row " + std::to_string(line_no));
  return v;
}

int parse_label(const std::string& s, std::size_t line_no, const std::string& column) {
  const double v = parse_double(s, line_no, column);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v || i < 0)
    throw std::runtime_error("load_csv: column '" + column + "' must be a nonnegative integer at row " +
                             std::to_string(line_no));
  return i;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1 || spec.subclusters_per_class < 1 || spec.dim < 1)
    throw std::invalid_argument("generate_synthetic: counts must be >= 1");
  if (!(spec.noise_std > 0.0))
    throw std::invalid_argument("generate_synthetic: noise_std must be positive");

  const std::size_t fine_count = spec.classes * spec.subclusters_per_class;
  const double min_dist = 4.0 * spec.noise_std;
  Matrix centers(fine_count, spec.dim);
  Rng center_rng(mix_seed(spec.seed, "centers"));
  for (std::size_t f = 0; f < fine_count; ++f) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      for (std::size_t j = 0; j < spec.dim; ++j)
        centers(f, j) = spec.center_scale * center_rng.normal();
      placed = true;
      for (std::size_t g = 0; g < f && placed; ++g) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j) {
          const double diff = centers(f, j) - centers(g, j);
          d2 += diff * diff;
        }
        if (d2 < min_dist * min_dist) placed = false;
      }
    }
    if (!placed)
      throw std::runtime_error(
          "generate_synthetic: could not place subcluster centers at least 4 noise_std apart "
          "after 1000 resamples; increase dim or center_scale, or reduce noise_std");
  }

  SyntheticData out;
  out.train.fine_to_coarse.resize(fine_count);
  for (std::size_t f = 0; f < fine_count; ++f)
    out.train.fine_to_coarse[f] = static_cast<int>(f / spec.subclusters_per_class);
  out.test.fine_to_coarse = out.train.fine_to_coarse;
  fill_split(out.train, spec.train_size, spec, centers, mix_seed(spec.seed, "train"), "train");
  fill_split(out.test, spec.test_size, spec, centers, mix_seed(spec.seed, "test"), "test");
  return out;
}

std::vector<int> binarize(const std::vector<int>& fine_labels) {
  std::vector<int> out(fine_labels.size());
  for (std::size_t i = 0; i < fine_labels.size(); ++i) out[i] = fine_labels[i] % 2;
  return out;
}

LabeledDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
  const std::vector<std::string> header = split_commas(line);

  std::size_t label_col = header.size();
  std::size_t fine_col = header.size();
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == schema.label_column) {
      label_col = j;
    } else if (header[j] == schema.fine_column) {
      fine_col = j;
    } else {
      feature_cols.push_back(j);
      feature_names.push_back(header[j]);
    }
  }
  if (label_col == header.size())
    throw std::runtime_error("load_csv: missing label column '" + schema.label_column + "' in " + path);
  if (feature_cols.empty())
    throw std::runtime_error("load_csv: no feature columns in " + path);
  const bool has_fine = fine_col != header.size();

  std::vector<double> values;
  std::vector<int> coarse, fine;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      values.push_back(parse_double(cells[feature_cols[k]], line_no, feature_names[k]));
    coarse.push_back(parse_label(cells[label_col], line_no, schema.label_column));
    if (has_fine) fine.push_back(parse_label(cells[fine_col], line_no, schema.fine_column));
  }
  if (coarse.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  LabeledDataset out;
  out.features = Matrix(coarse.size(), feature_cols.size());
  out.features.data = std::move(values);
  out.coarse_labels = std::move(coarse);
  out.classes = static_cast<std::size_t>(*std::max_element(out.coarse_labels.begin(),
                                                           out.coarse_labels.end())) + 1;
  if (!all_finite(out.features)) throw std::runtime_error("load_csv: non-finite feature in " + path);
  if (has_fine) {
    out.fine_labels = std::move(fine);
    const int max_fine = *std::max_element(out.fine_labels.begin(), out.fine_labels.end());
    out.fine_to_coarse.assign(static_cast<std::size_t>(max_fine) + 1, -1);
    for (std::size_t i = 0; i < out.fine_labels.size(); ++i) {
      int& mapped = out.fine_to_coarse[static_cast<std::size_t>(out.fine_labels[i])];
      if (mapped == -1) {
        mapped = out.coarse_labels[i];
      } else if (mapped != out.coarse_labels[i]) {
        throw std::runtime_error("load_csv: fine label " + std::to_string(out.fine_labels[i]) +
                                 " maps to multiple coarse labels");
      }
    }
  }
  return out;
}

void save_csv(const LabeledDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  for (std::size_t j = 0; j < dataset.dim(); ++j) out << 'f' << j << ',';
  out << "label";
  if (dataset.has_fine()) out << ",fine_label";
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < dataset.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", dataset.features(i, j));
      out << buf << ',';
    }
    out << dataset.coarse_labels[i];
    if (dataset.has_fine()) out << ',' << dataset.fine_labels[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

SemiSplitResult semi_split(const LabeledDataset& dataset, std::size_t labeled_count,
                           std::uint64_t seed) {
  if (labeled_count > dataset.size())
    throw std::invalid_argument("semi_split: labeled_count exceeds dataset size");
  if (labeled_count < dataset.classes)
    throw std::invalid_argument("semi_split: labeled_count below class count, cannot stratify");
  const std::vector<std::size_t> picked = stratified_pick(dataset, labeled_count, seed);
  std::vector<char> in_labeled(dataset.size(), 0);
  for (std::size_t i : picked) in_labeled[i] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(dataset.size() - labeled_count);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (!in_labeled[i]) rest.push_back(i);

  SemiSplitResult out;
  out.labeled = take_rows(dataset, picked);
  out.pool = take_rows(dataset, rest);
  out.pool.coarse_labels.clear();
  out.pool.fine_labels.clear();
  out.pool.split = "pool";
  return out;
}

LabeledDataset subsample_stratified(const LabeledDataset& dataset, std::size_t count,
                                    std::uint64_t seed) {
  if (count == dataset.size()) return dataset;
  return take_rows(dataset, stratified_pick(dataset, count, seed));
}

Standardizer fit_standardizer(const Matrix& features) {
  Standardizer s;
  s.mean = column_mean(features);
  s.scale.assign(features.cols, 0.0);
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < features.cols; ++j) {
      const double d = features(i, j) - s.mean[j];
      s.scale[j] += d * d;
    }
  for (double& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(features.rows));
    if (v == 0.0) v = 1.0;
  }
  return s;
}

void apply_standardizer(const Standardizer& s, Matrix& features) {
  if (s.mean.size() != features.cols)
    throw std::invalid_argument("apply_standardizer: dimension mismatch");
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < features.cols; ++j)
      features(i, j) = (features(i, j) - s.mean[j]) / s.scale[j];
}

void write_manifest(const SyntheticSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  out << "dataset: synthetic\n";
  out << "classes: " << spec.classes << "\n";
  out << "subclusters_per_class: " << spec.subclusters_per_class << "\n";
  out << "dim: " << spec.dim << "\n";
  out << "center_scale: " << spec.center_scale << "\n";
  out << "noise_std: " << spec.noise_std << "\n";
  out << "train_size: " << spec.train_size << "\n";
  out << "test_size: " << spec.test_size << "\n";
  out << "seed: " << spec.seed << "\n";
}

}  // namespace lelp::data
