#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lelp/matrix.hpp"

namespace lelp::data {

struct LabeledDataset {
  Matrix features;                  // n x d
  std::vector<int> coarse_labels;   // in [0, classes)
  std::vector<int> fine_labels;     // empty when fine labels are absent
  std::vector<int> fine_to_coarse;  // length = fine class count when present
  std::size_t classes = 0;
  std::string split = "train";

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
  bool has_fine() const { return !fine_labels.empty(); }
  std::size_t fine_classes() const { return fine_to_coarse.size(); }
};

struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t subclusters_per_class = 5;
  std::size_t dim = 16;
  double center_scale = 6.0;
  double noise_std = 1.0;
  std::size_t train_size = 8000;
  std::size_t test_size = 2000;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  LabeledDataset train;
  LabeledDataset test;
};

// Gaussian subcluster mixture: classes * subclusters_per_class isotropic
// blobs with centers resampled until pairwise distance >= 4 * noise_std.
// Fine label = subcluster id (class-major), coarse label = its class.
// Per-class counts differ by at most one; train and test use disjoint
// seeded streams.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// y % 2 per label.
std::vector<int> binarize(const std::vector<int>& fine_labels);

struct CsvSchema {
  std::string label_column = "label";
  std::string fine_column = "fine_label";  // loaded when the header has it
};

// UTF-8, comma-separated, header row. Feature columns are every column not
// named by the schema, in header order. Parse errors cite the 1-based row.
LabeledDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const LabeledDataset& dataset, const std::string& path);

struct SemiSplitResult {
  LabeledDataset labeled;
  LabeledDataset pool;  // labels stripped
};

// Class-stratified labeled subset of the requested size; the remainder
// becomes the unlabeled pool. Both preserve original row order.
SemiSplitResult semi_split(const LabeledDataset& dataset, std::size_t labeled_count,
                           std::uint64_t seed);

// Class-stratified subsample preserving original row order. count == n
// returns the dataset unchanged.
LabeledDataset subsample_stratified(const LabeledDataset& dataset, std::size_t count,
                                    std::uint64_t seed);

struct Standardizer {
  Vector mean;
  Vector scale;  // per-column std; columns with zero variance keep scale 1
};

Standardizer fit_standardizer(const Matrix& features);
void apply_standardizer(const Standardizer& s, Matrix& features);

// Structured-text record of the generating spec, written next to emitted
// datasets and run reports.
void write_manifest(const SyntheticSpec& spec, const std::string& path);

}  // namespace lelp::data
