#pragma once

#include <string>
#include <vector>

#include "psim/dataset.hpp"
#include "psim/matrix.hpp"

namespace psim {

// ---------------------------------------------------------------------------
// Cleaning

enum class BadPolicy { kHoldLast, kInterpolate, kDropRow };
enum class NegativePolicy { kClipZero, kMarkBad };

struct CleanPolicy {
    BadPolicy bad = BadPolicy::kHoldLast;
    NegativePolicy negatives = NegativePolicy::kClipZero;
    /// Bad runs longer than this are dropped instead of held/interpolated.
    int max_repair_gap = 30;
};

struct RepairEntry {
    std::string feature;
    std::string cause;  // bad_quality | missing | negative | dropped_rows
    int count = 0;
};

struct CleanResult {
    TimeSeriesDataset dataset;
    std::vector<RepairEntry> log;
};

/// Repairs bad-quality/missing samples and negatives per policy. The cleaned
/// dataset has no missing values; under clip-zero it has no negatives.
CleanResult clean(const TimeSeriesDataset& ds, const CleanPolicy& policy);

void save_repair_log_csv(const std::vector<RepairEntry>& log, const std::string& path);

// ---------------------------------------------------------------------------
// Feature relevance

struct PearsonEntry {
    std::string feature;
    double r = 0.0;
    bool zero_variance = false;
};

/// Features ranked by |r| against the target column (target excluded).
std::vector<PearsonEntry> pearson_rank(const TimeSeriesDataset& ds, const std::string& target);

enum class TimeFeature { kHour, kDayOfWeek, kMonth };

std::string time_feature_name(TimeFeature f);

struct TimeFeatureScore {
    TimeFeature feature;
    double score = 0.0;  // holdout R^2 x importance share of this encoding
    bool skipped = false;
};

struct TimeFeatureSelection {
    std::vector<TimeFeature> chosen;
    std::vector<TimeFeatureScore> scores;
};

/**
 * Scores cyclic encodings of hour / day-of-week / month by their importance
 * in a small gradient-boosted tree ensemble predicting the target, and keeps
 * those above `threshold`. Candidates whose full period exceeds the dataset
 * span are skipped. `n_trees` is the boosting budget (must be >= 1).
 */
TimeFeatureSelection select_time_features(
    const TimeSeriesDataset& ds, const std::string& target,
    const std::vector<TimeFeature>& candidates = {TimeFeature::kHour, TimeFeature::kDayOfWeek,
                                                  TimeFeature::kMonth},
    int n_trees = 50, double threshold = 0.05);

/// Appends sin/cos encodings of the chosen time features as good-quality columns.
TimeSeriesDataset append_time_features(const TimeSeriesDataset& ds,
                                       const std::vector<TimeFeature>& chosen);

// ---------------------------------------------------------------------------
// Splitting, standardization, windowing

struct SplitSpec {
    double train_fraction = 0.85;       // remainder is the test split
    double validation_fraction = 0.15;  // fraction of the training part
};

struct SplitIndices {
    // Half-open chronological row ranges into the source dataset.
    int train_begin = 0, train_end = 0;
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
};

/// Chronological, contiguous, non-overlapping; test is the final part.
/// Each split must be able to hold at least l+1 rows.
SplitIndices split_indices(int n_rows, const SplitSpec& spec, int l);

struct ScalerStats {
    std::vector<std::string> features;
    std::vector<double> mean;
    std::vector<double> std;
};

/// Per-feature mean/std from training rows only; zero variance is an error.
ScalerStats fit_scaler(const Matrix& train_values, const std::vector<std::string>& features);
Matrix apply_scaler(const ScalerStats& s, const Matrix& values);
Matrix invert_scaler(const ScalerStats& s, const Matrix& values);

/**
 * Stride-1 sliding windows over one split: window i covers rows [i, i+l),
 * its target is row i+l-1+target_offset. Owns a copy of the (standardized)
 * split values; `offset` records where the split starts in the parent
 * dataset so targets carry absolute indices.
 */
class WindowSet {
public:
    WindowSet(Matrix standardized, int l, int offset = 0, int target_offset = 1);

    int count() const;
    int l() const { return l_; }
    int n_features() const { return data_.cols(); }
    Matrix window(int i) const;
    Matrix target(int i) const;
    int target_absolute_index(int i) const { return offset_ + i + l_ - 1 + target_offset_; }
    const Matrix& data() const { return data_; }

private:
    Matrix data_;
    int l_;
    int offset_;
    int target_offset_;
};

WindowSet make_windows(const Matrix& standardized, int l, int offset = 0, int target_offset = 1);

}  // namespace psim
