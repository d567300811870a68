#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psim/matrix.hpp"

namespace psim {

struct CivilTime {
    int year, month, day, hour, minute, second;
};

int64_t civil_to_epoch(const CivilTime& c);
CivilTime epoch_to_civil(int64_t epoch_seconds);
/// Day of week, Monday = 0 .. Sunday = 6.
int day_of_week(int64_t epoch_seconds);
std::string format_iso8601(int64_t epoch_seconds);
/// Strict "YYYY-MM-DDTHH:MM:SSZ"; throws on malformed input.
int64_t parse_iso8601(const std::string& s);

/**
 * Multivariate process log: per-row timestamp plus (value, quality) per
 * feature. Quality is binary, 0 = good, 1 = bad. Values may be NaN only
 * where quality is bad; cleaning removes them.
 */
class TimeSeriesDataset {
public:
    TimeSeriesDataset() = default;
    TimeSeriesDataset(std::vector<int64_t> timestamps, std::vector<std::string> features,
                      Matrix values, Matrix quality,
                      std::map<std::string, std::string> metadata = {});

    int n_rows() const { return values_.rows(); }
    int n_features() const { return values_.cols(); }

    const std::vector<int64_t>& timestamps() const { return timestamps_; }
    const std::vector<std::string>& feature_names() const { return features_; }
    const Matrix& values() const { return values_; }
    const Matrix& quality() const { return quality_; }
    Matrix& values() { return values_; }
    Matrix& quality() { return quality_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }
    std::map<std::string, std::string>& metadata() { return metadata_; }

    int feature_index(const std::string& name) const;  // -1 if absent

    /// Shape/monotonicity checks; constant spacing only when required.
    void validate(bool require_constant_spacing) const;

    TimeSeriesDataset slice_rows(int r0, int r1) const;

    bool operator==(const TimeSeriesDataset& o) const {
        return timestamps_ == o.timestamps_ && features_ == o.features_ &&
               values_ == o.values_ && quality_ == o.quality_ && metadata_ == o.metadata_;
    }

private:
    std::vector<int64_t> timestamps_;
    std::vector<std::string> features_;
    Matrix values_;
    Matrix quality_;
    std::map<std::string, std::string> metadata_;
};

/**
 * CSV schema: header `timestamp,<f1>,<f1>_q,...,<fm>,<fm>_q`, ISO-8601 UTC
 * timestamps, quality in {0,1} (0 = good). Optional leading `# key: value`
 * comment lines carry metadata. Doubles are written shortest-round-trip, so
 * write -> read is lossless.
 */
void save_dataset_csv(const TimeSeriesDataset& ds, const std::string& path);
TimeSeriesDataset load_dataset(const std::string& path);

}  // namespace psim
