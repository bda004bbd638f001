#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pathloss/csv.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/isolation_forest.hpp"

namespace pathloss {

// Environmental covariates, in the order used throughout: CO2 (ppm),
// relative humidity (%), temperature (degC), barometric pressure (hPa),
// PM2.5 (ug/m3).
inline constexpr std::size_t kEnvCount = 5;
inline const std::array<std::string, kEnvCount> kEnvNames = {"co2", "rh", "temp", "pressure",
                                                             "pm25"};

struct CampaignRecord {
    std::string device_id;
    double timestamp = 0.0; // UTC seconds
    double distance_m = 0.0;
    int walls_brick = 0;
    int walls_wood = 0;
    std::array<double, kEnvCount> env{};
    double snr_db = 0.0;
    int sf = 7;
    double freq_mhz = 868.0;
    double path_loss_db = 0.0;
};

struct CleaningConfig {
    std::set<int> sf_keep = {7, 8, 9, 10};
    double contamination = 0.01;
    int iforest_trees = 100;
    int iforest_subsample = 256;
    std::uint64_t seed = 0; // required: no implicit randomness
};

struct DropLedger {
    std::size_t input_rows = 0;
    std::size_t duplicates = 0;
    std::size_t sf_filter = 0;
    std::size_t outliers = 0;

    std::size_t total_dropped() const { return duplicates + sf_filter + outliers; }
};

struct RowError {
    std::size_t line = 0;
    std::string reason;
};

struct ParseResult {
    std::vector<CampaignRecord> records;
    std::vector<RowError> row_errors;
};

// Column-name mapping from a source CSV onto the record fields. Defaults
// match the canonical schema the CLI writes back out.
struct CsvSchema {
    std::string device = "device_id";
    std::string timestamp = "timestamp";
    std::string distance = "distance_m";
    std::string walls_brick = "wall_brick";
    std::string walls_wood = "wall_wood";
    std::array<std::string, kEnvCount> env = {"co2_ppm", "rh_pct", "temp_c", "pressure_hpa",
                                              "pm25_ugm3"};
    std::string snr = "snr_db";
    std::string sf = "sf";
    std::string freq = "freq_mhz";
    std::string path_loss = "path_loss_db";

    enum class TimestampFormat { auto_detect, unix_seconds, iso8601 };
    TimestampFormat timestamp_format = TimestampFormat::auto_detect;
};

namespace detail_campaign {

// days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// days-from-civil)
inline long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

inline bool parse_iso8601(const std::string& s, double& out) {
    // YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|+hh:mm|-hh:mm]
    if (s.size() < 19) return false;
    auto digit = [&](std::size_t i) { return s[i] >= '0' && s[i] <= '9'; };
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u, 11u, 12u, 14u, 15u, 17u, 18u})
        if (!digit(i)) return false;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return false;
    const long long y = std::stoll(s.substr(0, 4));
    const unsigned mo = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
    const int hh = std::stoi(s.substr(11, 2));
    const int mi = std::stoi(s.substr(14, 2));
    const int ss = std::stoi(s.substr(17, 2));
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mi > 59 || ss > 60) return false;
    std::size_t pos = 19;
    double frac = 0.0;
    if (pos < s.size() && s[pos] == '.') {
        std::size_t end = pos + 1;
        while (end < s.size() && digit(end)) ++end;
        if (end == pos + 1) return false;
        frac = std::stod(s.substr(pos, end - pos));
        pos = end;
    }
    double offset = 0.0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            // utc
        } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
            const int oh = std::stoi(s.substr(pos + 1, 2));
            const int om = std::stoi(s.substr(pos + 4, 2));
            offset = (s[pos] == '+' ? 1.0 : -1.0) * (oh * 3600.0 + om * 60.0);
        } else {
            return false;
        }
    }
    out = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + hh * 3600.0 + mi * 60.0 +
          ss + frac - offset;
    return true;
}

inline bool parse_timestamp(const std::string& s, CsvSchema::TimestampFormat fmt, double& out) {
    using F = CsvSchema::TimestampFormat;
    if (fmt == F::unix_seconds) return csv::parse_double(s, out);
    if (fmt == F::iso8601) return parse_iso8601(s, out);
    return csv::parse_double(s, out) || parse_iso8601(s, out);
}

} // namespace detail_campaign

// Reads a campaign CSV under the given schema. Records come back in file
// order; rows that fail to parse or violate field invariants are collected
// in the error report rather than silently dropped.
inline ParseResult parse_campaign_csv(const std::string& path, const CsvSchema& schema = {}) {
    const csv::Table table = csv::read_file(path);

    auto find_column = [&](const std::string& name) {
        std::optional<std::size_t> idx;
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (table.header[j] == name) {
                if (idx) throw MissingColumn("duplicated column: " + name);
                idx = j;
            }
        }
        if (!idx) throw MissingColumn("missing column: " + name);
        return *idx;
    };

    const std::size_t c_device = find_column(schema.device);
    const std::size_t c_ts = find_column(schema.timestamp);
    const std::size_t c_dist = find_column(schema.distance);
    const std::size_t c_brick = find_column(schema.walls_brick);
    const std::size_t c_wood = find_column(schema.walls_wood);
    std::array<std::size_t, kEnvCount> c_env{};
    for (std::size_t j = 0; j < kEnvCount; ++j) c_env[j] = find_column(schema.env[j]);
    const std::size_t c_snr = find_column(schema.snr);
    const std::size_t c_sf = find_column(schema.sf);
    const std::size_t c_freq = find_column(schema.freq);
    const std::size_t c_pl = find_column(schema.path_loss);

    ParseResult out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        auto fail = [&](const std::string& why) { out.row_errors.push_back({line, why}); };
        if (row.size() != table.header.size()) {
            fail("field count does not match header");
            continue;
        }
        CampaignRecord rec;
        rec.device_id = row[c_device];
        if (rec.device_id.empty()) {
            fail("empty device id");
            continue;
        }
        if (!detail_campaign::parse_timestamp(row[c_ts], schema.timestamp_format, rec.timestamp)) {
            fail("unparseable timestamp: " + row[c_ts]);
            continue;
        }
        if (!csv::parse_double(row[c_dist], rec.distance_m) || rec.distance_m <= 0.0) {
            fail("distance_m must be a positive real");
            continue;
        }
        long brick = 0, wood = 0;
        if (!csv::parse_long(row[c_brick], brick) || brick < 0 ||
            !csv::parse_long(row[c_wood], wood) || wood < 0) {
            fail("wall counts must be non-negative integers");
            continue;
        }
        rec.walls_brick = static_cast<int>(brick);
        rec.walls_wood = static_cast<int>(wood);
        bool env_ok = true;
        for (std::size_t j = 0; j < kEnvCount; ++j) {
            if (!csv::parse_double(row[c_env[j]], rec.env[j]) || !std::isfinite(rec.env[j])) {
                fail("unparseable environmental value: " + schema.env[j]);
                env_ok = false;
                break;
            }
        }
        if (!env_ok) continue;
        if (!csv::parse_double(row[c_snr], rec.snr_db)) {
            fail("unparseable snr");
            continue;
        }
        long sf = 0;
        if (!csv::parse_long(row[c_sf], sf) || sf < 7 || sf > 12) {
            fail("sf must be an integer in 7..12");
            continue;
        }
        rec.sf = static_cast<int>(sf);
        if (!csv::parse_double(row[c_freq], rec.freq_mhz) || rec.freq_mhz <= 0.0) {
            fail("freq_mhz must be a positive real");
            continue;
        }
        if (!csv::parse_double(row[c_pl], rec.path_loss_db)) {
            fail("unparseable path_loss_db");
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

struct CleanResult {
    std::vector<CampaignRecord> kept;
    DropLedger dropped;
};

// Anomaly-screen feature matrix: every variable of the mean model plus the
// response, i.e. [z_d, walls, env..., snr, freq, path_loss].
inline std::vector<std::vector<double>> anomaly_feature_matrix(
    const std::vector<CampaignRecord>& records) {
    std::vector<std::vector<double>> m;
    m.reserve(records.size());
    for (const auto& r : records) {
        std::vector<double> row;
        row.reserve(kEnvCount + 6);
        row.push_back(10.0 * std::log10(r.distance_m));
        row.push_back(static_cast<double>(r.walls_brick));
        row.push_back(static_cast<double>(r.walls_wood));
        for (double e : r.env) row.push_back(e);
        row.push_back(r.snr_db);
        row.push_back(r.freq_mhz);
        row.push_back(r.path_loss_db);
        m.push_back(std::move(row));
    }
    return m;
}

// Sort by (device, timestamp), drop duplicates, drop out-of-profile spreading
// factors, then flag ceil(contamination * n) isolation-forest outliers over
// the full cleaned pool. Duplicate key is (device, timestamp, path_loss,
// snr); a second record at an already-seen (device, timestamp) is also
// treated as a duplicate so per-device timestamps end up strictly
// increasing.
inline CleanResult clean(std::vector<CampaignRecord> records, const CleaningConfig& config) {
    if (records.empty()) throw EmptyFile("clean: no records");
    if (!(config.contamination > 0.0 && config.contamination < 0.5))
        throw std::invalid_argument("clean: contamination must lie in (0, 0.5)");
    for (int sf : config.sf_keep)
        if (sf < 7 || sf > 12) throw std::invalid_argument("clean: sf_keep outside 7..12");

    CleanResult out;
    out.dropped.input_rows = records.size();

    std::stable_sort(records.begin(), records.end(), [](const CampaignRecord& a,
                                                        const CampaignRecord& b) {
        if (a.device_id != b.device_id) return a.device_id < b.device_id;
        return a.timestamp < b.timestamp;
    });

    // dedup
    std::vector<CampaignRecord> stage;
    std::set<std::tuple<std::string, double, double, double>> seen;
    std::set<std::pair<std::string, double>> seen_ts;
    for (auto& r : records) {
        const auto key = std::make_tuple(r.device_id, r.timestamp, r.path_loss_db, r.snr_db);
        if (seen.count(key) || seen_ts.count({r.device_id, r.timestamp})) {
            ++out.dropped.duplicates;
            continue;
        }
        seen.insert(key);
        seen_ts.insert({r.device_id, r.timestamp});
        stage.push_back(std::move(r));
    }

    // spreading-factor filter
    std::vector<CampaignRecord> filtered;
    filtered.reserve(stage.size());
    for (auto& r : stage) {
        if (config.sf_keep.count(r.sf)) {
            filtered.push_back(std::move(r));
        } else {
            ++out.dropped.sf_filter;
        }
    }

    if (filtered.empty()) throw AllRowsDropped("clean: nothing left after filters");

    // the anomaly screen needs at least two rows (subsample >= 2); below
    // that it is skipped rather than flagging the whole remainder
    const std::size_t n = filtered.size();
    std::vector<bool> flagged(n, false);
    if (n >= 2) {
        const std::size_t flag_count =
            static_cast<std::size_t>(std::ceil(config.contamination * static_cast<double>(n)));
        const int sub = std::min<int>(config.iforest_subsample, static_cast<int>(n));
        const auto scores = isolation_forest_scores(anomaly_feature_matrix(filtered),
                                                    config.iforest_trees, std::max(2, sub),
                                                    config.seed);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        for (std::size_t i = 0; i < flag_count; ++i) flagged[order[i]] = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (flagged[i]) {
            ++out.dropped.outliers;
        } else {
            out.kept.push_back(std::move(filtered[i]));
        }
    }
    if (out.kept.empty()) throw AllRowsDropped("clean: every row flagged");
    return out;
}

struct SplitResult {
    std::vector<CampaignRecord> train;
    std::vector<CampaignRecord> test;
};

// Per-device chronological hold-out. Each device's earliest records go to
// train; train receives the ceiling when the cut is fractional.
inline SplitResult chronological_split(const std::vector<CampaignRecord>& records,
                                       double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("chronological_split: test_fraction must be in (0,1)");

    std::map<std::string, std::vector<CampaignRecord>> by_device;
    for (const auto& r : records) by_device[r.device_id].push_back(r);

    SplitResult out;
    for (auto& [device, recs] : by_device) {
        if (recs.size() < 2) throw DeviceTooSmall("device has fewer than 2 records: " + device);
        std::stable_sort(recs.begin(), recs.end(), [](const CampaignRecord& a,
                                                      const CampaignRecord& b) {
            return a.timestamp < b.timestamp;
        });
        const std::size_t n = recs.size();
        const std::size_t n_train = static_cast<std::size_t>(
            std::ceil((1.0 - test_fraction) * static_cast<double>(n)));
        for (std::size_t i = 0; i < n; ++i)
            (i < n_train ? out.train : out.test).push_back(std::move(recs[i]));
    }
    return out;
}

} // namespace pathloss
