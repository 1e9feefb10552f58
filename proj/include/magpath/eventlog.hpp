#pragma once
// Timestamped multi-perspective event logs.
//
// An event log holds one record per encounter: the case (patient) it belongs
// to, a timestamp and one categorical code per declared perspective
// (intervention, occupation, unit, optionally diagnosis). Events of a case are
// kept in a total, deterministic order so that downstream Sequence ordinals
// are reproducible.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace magpath {

/// Placeholder stored for a perspective with no value in the source row.
inline constexpr std::string_view kMissing = "__MISSING__";

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t row)
        : std::runtime_error(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

enum class TimeUnit { Seconds, Hours, Days, Weeks };

double seconds_per_unit(TimeUnit unit);
std::string to_string(TimeUnit unit);
TimeUnit parse_time_unit(std::string_view name);

struct Event {
    std::string case_id;
    Timestamp timestamp = 0;
    std::vector<std::string> perspectives;  // aligned with EventLog::schema
    std::map<std::string, std::string> extras;
    std::size_t row = 0;  // original row index, last tie-break key
};

/// Events ordered by (case, timestamp, perspective codes, row).
class EventLog {
public:
    EventLog() = default;
    EventLog(std::vector<std::string> schema, std::vector<Event> events,
             TimeUnit time_unit = TimeUnit::Days);

    const std::vector<std::string>& schema() const { return schema_; }
    const std::vector<Event>& events() const { return events_; }
    TimeUnit time_unit() const { return time_unit_; }

    std::size_t perspective_index(std::string_view name) const;
    std::optional<std::size_t> find_perspective(std::string_view name) const;

    std::size_t case_count() const { return cases_.size(); }
    /// Case ids in sorted order.
    std::vector<std::string> case_ids() const;
    /// Half-open [begin, end) range of a case's events inside events().
    std::pair<std::size_t, std::size_t> case_range(const std::string& case_id) const;
    bool has_case(const std::string& case_id) const { return cases_.count(case_id) != 0; }
    std::size_t case_length(const std::string& case_id) const;

    /// New log restricted to the given cases (unknown ids are ignored).
    template <class Range>
    EventLog subset(const Range& ids) const {
        std::vector<Event> kept;
        for (const auto& id : ids) {
            auto it = cases_.find(id);
            if (it == cases_.end()) continue;
            for (std::size_t i = it->second.first; i < it->second.second; ++i) kept.push_back(events_[i]);
        }
        return EventLog(schema_, std::move(kept), time_unit_);
    }

    /// Interval between two timestamps in this log's time unit.
    double interval(Timestamp from, Timestamp to) const;

private:
    void index();

    std::vector<std::string> schema_;
    std::vector<Event> events_;
    TimeUnit time_unit_ = TimeUnit::Days;
    std::map<std::string, std::pair<std::size_t, std::size_t>> cases_;
};

struct PerspectiveColumn {
    std::string name;
    std::string column;
    bool optional = false;
};

/// Column mapping for delimited input.
struct ParseConfig {
    char delimiter = ',';
    std::string date_format = "%Y-%m-%d";
    std::string case_column = "case_id";
    std::string timestamp_column = "date";
    std::vector<PerspectiveColumn> perspectives;
    std::vector<std::string> extras;
    TimeUnit time_unit = TimeUnit::Days;
    /// Strict mode throws on the first malformed row; otherwise rows are counted.
    bool strict = true;
    /// In non-strict mode, malformed rows are dropped only when this is set;
    /// otherwise parsing fails after reporting them all.
    bool drop_malformed = false;

    static ParseConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct MalformedRow {
    std::size_t row;
    std::string reason;
};

struct ParseResult {
    EventLog log;
    std::vector<MalformedRow> malformed;
};

ParseResult parse_event_log(std::istream& source, const ParseConfig& config);

/// Canonical JSON-lines form: one header line, then one event per line in log order.
void write_jsonl(const EventLog& log, std::ostream& out);
std::string to_jsonl(const EventLog& log);
EventLog read_jsonl(std::istream& in);

Timestamp parse_timestamp(std::string_view text, const std::string& format);
/// "YYYY-MM-DD" for midnight timestamps, "YYYY-MM-DDTHH:MM:SS" otherwise.
std::string format_timestamp(Timestamp ts);

struct LengthStats {
    std::size_t count = 0;
    double median = 0;
    double q1 = 0;
    double q3 = 0;
    double iqr = 0;
    double outlier_threshold = 0;
    std::size_t outlier_count = 0;
    std::size_t min_length = 0;
    std::size_t max_length = 0;

    nlohmann::json to_json() const;
};

/// Quantile by linear interpolation between order statistics:
/// h = (n - 1) p, q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
double quantile(std::vector<double> values, double p);

/// Quartiles of per-case event counts; outliers are lengths above q3 + 4 iqr.
LengthStats pathway_length_stats(const EventLog& log);

/// Uniform sample of n cases among those with at most max_length events.
EventLog sample_pathways(const EventLog& log, std::size_t max_length, std::size_t n,
                         std::uint64_t seed);

}  // namespace magpath
