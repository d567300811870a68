#include "psim/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace psim {

namespace {

// Howard Hinnant's civil calendar algorithms.
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = static_cast<int>(y - era * 400);
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int doe = static_cast<int>(z - era * 146097);
    const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yy = static_cast<int64_t>(yoe) + era * 400;
    const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, bool& ok) {
    if (s == "nan" || s == "NaN" || s == "NAN")
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    ok = res.ec == std::errc() && res.ptr == s.data() + s.size();
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

int64_t civil_to_epoch(const CivilTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
           c.second;
}

CivilTime epoch_to_civil(int64_t epoch_seconds) {
    const int64_t days = floor_div(epoch_seconds, 86400);
    int64_t secs = epoch_seconds - days * 86400;
    CivilTime c{};
    civil_from_days(days, c.year, c.month, c.day);
    c.hour = static_cast<int>(secs / 3600);
    c.minute = static_cast<int>((secs % 3600) / 60);
    c.second = static_cast<int>(secs % 60);
    return c;
}

int day_of_week(int64_t epoch_seconds) {
    const int64_t days = floor_div(epoch_seconds, 86400);
    return static_cast<int>(((days % 7) + 7 + 3) % 7);  // 1970-01-01 was a Thursday
}

std::string format_iso8601(int64_t epoch_seconds) {
    CivilTime c = epoch_to_civil(epoch_seconds);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  c.hour, c.minute, c.second);
    return buf;
}

int64_t parse_iso8601(const std::string& s) {
    CivilTime c{};
    if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
        s[16] != ':' || s[19] != 'Z')
        throw std::invalid_argument("bad ISO-8601 timestamp: '" + s + "'");
    auto num = [&](int pos, int len) {
        int v = 0;
        for (int i = pos; i < pos + len; ++i) {
            if (s[i] < '0' || s[i] > '9')
                throw std::invalid_argument("bad ISO-8601 timestamp: '" + s + "'");
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    c.year = num(0, 4);
    c.month = num(5, 2);
    c.day = num(8, 2);
    c.hour = num(11, 2);
    c.minute = num(14, 2);
    c.second = num(17, 2);
    if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 || c.minute > 59 ||
        c.second > 59)
        throw std::invalid_argument("bad ISO-8601 timestamp: '" + s + "'");
    return civil_to_epoch(c);
}

TimeSeriesDataset::TimeSeriesDataset(std::vector<int64_t> timestamps,
                                     std::vector<std::string> features, Matrix values,
                                     Matrix quality, std::map<std::string, std::string> metadata)
    : timestamps_(std::move(timestamps)),
      features_(std::move(features)),
      values_(std::move(values)),
      quality_(std::move(quality)),
      metadata_(std::move(metadata)) {
    if (values_.rows() != static_cast<int>(timestamps_.size()) ||
        values_.cols() != static_cast<int>(features_.size()) || !values_.same_shape(quality_))
        throw std::invalid_argument("TimeSeriesDataset: inconsistent shapes");
}

int TimeSeriesDataset::feature_index(const std::string& name) const {
    for (size_t i = 0; i < features_.size(); ++i)
        if (features_[i] == name) return static_cast<int>(i);
    return -1;
}

void TimeSeriesDataset::validate(bool require_constant_spacing) const {
    if (timestamps_.empty()) throw std::invalid_argument("dataset: empty");
    int64_t spacing = timestamps_.size() > 1 ? timestamps_[1] - timestamps_[0] : 0;
    for (size_t i = 1; i < timestamps_.size(); ++i) {
        int64_t dt = timestamps_[i] - timestamps_[i - 1];
        if (dt <= 0)
            throw std::invalid_argument("dataset: timestamps not strictly increasing at row " +
                                        std::to_string(i));
        if (require_constant_spacing && dt != spacing)
            throw std::invalid_argument("dataset: irregular timestamp spacing at row " +
                                        std::to_string(i) + " (" + std::to_string(dt) + "s vs " +
                                        std::to_string(spacing) + "s)");
    }
    for (int r = 0; r < quality_.rows(); ++r)
        for (int c = 0; c < quality_.cols(); ++c) {
            double q = quality_(r, c);
            if (q != 0.0 && q != 1.0)
                throw std::invalid_argument("dataset: quality flag not in {0,1} at row " +
                                            std::to_string(r) + ", feature " + features_[c]);
        }
}

TimeSeriesDataset TimeSeriesDataset::slice_rows(int r0, int r1) const {
    std::vector<int64_t> ts(timestamps_.begin() + r0, timestamps_.begin() + r1);
    return TimeSeriesDataset(std::move(ts), features_, values_.slice_rows(r0, r1),
                             quality_.slice_rows(r0, r1), metadata_);
}

void save_dataset_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : ds.metadata()) f << "# " << k << ": " << v << "\n";
    f << "timestamp";
    for (const auto& name : ds.feature_names()) f << "," << name << "," << name << "_q";
    f << "\n";
    for (int r = 0; r < ds.n_rows(); ++r) {
        f << format_iso8601(ds.timestamps()[r]);
        for (int c = 0; c < ds.n_features(); ++c) {
            f << "," << format_double(ds.values()(r, c)) << ","
              << (ds.quality()(r, c) != 0.0 ? 1 : 0);
        }
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

TimeSeriesDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    std::map<std::string, std::string> metadata;
    // metadata comments, then header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto colon = line.find(':');
            if (colon != std::string::npos) {
                std::string key = line.substr(1, colon - 1);
                std::string val = line.substr(colon + 1);
                auto trim = [](std::string s) {
                    size_t a = s.find_first_not_of(" \t\r");
                    size_t b = s.find_last_not_of(" \t\r");
                    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
                };
                metadata[trim(key)] = trim(val);
            }
            continue;
        }
        break;
    }
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "timestamp" || header.size() % 2 == 0)
        throw std::runtime_error(path + ": bad header, expected timestamp,<f>,<f>_q,...");
    std::vector<std::string> features;
    for (size_t i = 1; i < header.size(); i += 2) {
        if (header[i + 1] != header[i] + "_q")
            throw std::runtime_error(path + ": column " + std::to_string(i + 2) +
                                     " should be '" + header[i] + "_q', got '" + header[i + 1] +
                                     "'");
        features.push_back(header[i]);
    }
    const int m = static_cast<int>(features.size());
    std::vector<int64_t> timestamps;
    std::vector<double> vals, quals;
    int row = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        timestamps.push_back(parse_iso8601(cells[0]));
        for (int c = 0; c < m; ++c) {
            bool ok = true;
            double v = parse_double(cells[1 + 2 * c], ok);
            if (!ok)
                throw std::runtime_error(path + ": row " + std::to_string(row) + ", column '" +
                                         features[c] + "': non-numeric value '" +
                                         cells[1 + 2 * c] + "'");
            double q = parse_double(cells[2 + 2 * c], ok);
            if (!ok || (q != 0.0 && q != 1.0))
                throw std::runtime_error(path + ": row " + std::to_string(row) + ", column '" +
                                         features[c] + "_q': quality must be 0 or 1, got '" +
                                         cells[2 + 2 * c] + "'");
            vals.push_back(v);
            quals.push_back(q);
        }
    }
    const int n = static_cast<int>(timestamps.size());
    Matrix values(n, m), quality(n, m);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) {
            values(r, c) = vals[static_cast<size_t>(r) * m + c];
            quality(r, c) = quals[static_cast<size_t>(r) * m + c];
        }
    TimeSeriesDataset ds(std::move(timestamps), std::move(features), std::move(values),
                         std::move(quality), std::move(metadata));
    ds.validate(true);
    return ds;
}

}  // namespace psim
