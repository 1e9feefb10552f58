#include "magpath/eventlog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

namespace magpath {

using nlohmann::json;

double seconds_per_unit(TimeUnit unit) {
    switch (unit) {
        case TimeUnit::Seconds: return 1.0;
        case TimeUnit::Hours: return 3600.0;
        case TimeUnit::Days: return 86400.0;
        case TimeUnit::Weeks: return 7 * 86400.0;
    }
    return 86400.0;
}

std::string to_string(TimeUnit unit) {
    switch (unit) {
        case TimeUnit::Seconds: return "seconds";
        case TimeUnit::Hours: return "hours";
        case TimeUnit::Days: return "days";
        case TimeUnit::Weeks: return "weeks";
    }
    return "days";
}

TimeUnit parse_time_unit(std::string_view name) {
    if (name == "seconds") return TimeUnit::Seconds;
    if (name == "hours") return TimeUnit::Hours;
    if (name == "days") return TimeUnit::Days;
    if (name == "weeks") return TimeUnit::Weeks;
    throw SchemaError("unknown time unit '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// EventLog
// ---------------------------------------------------------------------------

EventLog::EventLog(std::vector<std::string> schema, std::vector<Event> events, TimeUnit time_unit)
    : schema_(std::move(schema)), events_(std::move(events)), time_unit_(time_unit) {
    for (const auto& e : events_) {
        if (e.case_id.empty()) throw SchemaError("event with empty case id");
        if (e.perspectives.size() != schema_.size())
            throw SchemaError("event of case '" + e.case_id + "' does not match the schema");
    }
    std::stable_sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
        return std::tie(a.case_id, a.timestamp, a.perspectives, a.row) <
               std::tie(b.case_id, b.timestamp, b.perspectives, b.row);
    });
    index();
}

void EventLog::index() {
    cases_.clear();
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= events_.size(); ++i) {
        if (i == events_.size() || events_[i].case_id != events_[begin].case_id) {
            cases_.emplace(events_[begin].case_id, std::make_pair(begin, i));
            begin = i;
        }
    }
}

std::optional<std::size_t> EventLog::find_perspective(std::string_view name) const {
    auto it = std::find(schema_.begin(), schema_.end(), name);
    if (it == schema_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - schema_.begin());
}

std::size_t EventLog::perspective_index(std::string_view name) const {
    auto idx = find_perspective(name);
    if (!idx) throw SchemaError("perspective '" + std::string(name) + "' is not in the schema");
    return *idx;
}

std::vector<std::string> EventLog::case_ids() const {
    std::vector<std::string> ids;
    ids.reserve(cases_.size());
    for (const auto& [id, range] : cases_) ids.push_back(id);
    return ids;
}

std::pair<std::size_t, std::size_t> EventLog::case_range(const std::string& case_id) const {
    auto it = cases_.find(case_id);
    if (it == cases_.end()) throw std::out_of_range("unknown case '" + case_id + "'");
    return it->second;
}

std::size_t EventLog::case_length(const std::string& case_id) const {
    auto [b, e] = case_range(case_id);
    return e - b;
}

double EventLog::interval(Timestamp from, Timestamp to) const {
    return static_cast<double>(to - from) / seconds_per_unit(time_unit_);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

ParseConfig ParseConfig::from_json(const json& j) {
    ParseConfig c;
    if (j.contains("delimiter")) {
        auto d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw SchemaError("delimiter must be a single character");
        c.delimiter = d[0];
    }
    c.date_format = j.value("date_format", c.date_format);
    c.case_column = j.value("case_column", c.case_column);
    c.timestamp_column = j.value("timestamp_column", c.timestamp_column);
    c.strict = j.value("strict", c.strict);
    c.drop_malformed = j.value("drop_malformed", c.drop_malformed);
    if (j.contains("time_unit")) c.time_unit = parse_time_unit(j.at("time_unit").get<std::string>());
    if (!j.contains("perspectives")) throw SchemaError("config has no perspectives");
    for (const auto& p : j.at("perspectives")) {
        PerspectiveColumn col;
        col.name = p.at("name").get<std::string>();
        col.column = p.value("column", col.name);
        col.optional = p.value("optional", false);
        c.perspectives.push_back(col);
    }
    if (j.contains("extras")) c.extras = j.at("extras").get<std::vector<std::string>>();
    return c;
}

json ParseConfig::to_json() const {
    json persp = json::array();
    for (const auto& p : perspectives)
        persp.push_back({{"name", p.name}, {"column", p.column}, {"optional", p.optional}});
    return {{"delimiter", std::string(1, delimiter)},
            {"date_format", date_format},
            {"case_column", case_column},
            {"timestamp_column", timestamp_column},
            {"perspectives", persp},
            {"extras", extras},
            {"time_unit", to_string(time_unit)},
            {"strict", strict},
            {"drop_malformed", drop_malformed}};
}

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

Timestamp parse_timestamp(std::string_view text, const std::string& format) {
    std::tm tm{};
    std::string buf(text);
    const char* end = strptime(buf.c_str(), format.c_str(), &tm);
    if (end == nullptr) throw std::invalid_argument("cannot parse date '" + buf + "'");
    while (*end == ' ' || *end == '\r') ++end;
    if (*end != '\0') throw std::invalid_argument("trailing characters in date '" + buf + "'");
    return static_cast<Timestamp>(timegm(&tm));
}

std::string format_timestamp(Timestamp ts) {
    std::time_t t = static_cast<std::time_t>(ts);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    if (ts % 86400 == 0)
        std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    else
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    return buf;
}

namespace {

Timestamp parse_canonical_timestamp(const std::string& text) {
    if (text.size() > 10) return parse_timestamp(text, "%Y-%m-%dT%H:%M:%S");
    return parse_timestamp(text, "%Y-%m-%d");
}

// RFC 4180 style record splitting; quoted fields may contain the delimiter and
// doubled quotes. Returns false at end of input.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Delimited input
// ---------------------------------------------------------------------------

ParseResult parse_event_log(std::istream& source, const ParseConfig& config) {
    if (config.perspectives.empty()) throw SchemaError("no perspectives configured");
    std::vector<std::string> header;
    if (!read_record(source, config.delimiter, header)) throw SchemaError("empty input: no header row");
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    for (auto& h : header) h = trim(h);

    auto column_of = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("required column '" + name + "' is not in the header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t case_col = column_of(config.case_column);
    const std::size_t ts_col = column_of(config.timestamp_column);
    std::vector<std::size_t> persp_cols;
    std::vector<std::string> schema;
    for (const auto& p : config.perspectives) {
        persp_cols.push_back(column_of(p.column));
        schema.push_back(p.name);
    }
    std::vector<std::size_t> extra_cols;
    for (const auto& x : config.extras) extra_cols.push_back(column_of(x));

    ParseResult result;
    std::vector<Event> events;
    std::vector<std::string> fields;
    std::size_t row = 0;
    while (read_record(source, config.delimiter, fields)) {
        ++row;
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        std::string reason;
        Event ev;
        ev.row = row;
        if (fields.size() < header.size()) {
            reason = "expected " + std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size());
        } else {
            ev.case_id = trim(fields[case_col]);
            if (ev.case_id.empty()) reason = "empty case id";
            if (reason.empty()) {
                try {
                    ev.timestamp = parse_timestamp(trim(fields[ts_col]), config.date_format);
                } catch (const std::invalid_argument& e) {
                    reason = e.what();
                }
            }
            for (std::size_t k = 0; reason.empty() && k < persp_cols.size(); ++k) {
                auto value = trim(fields[persp_cols[k]]);
                if (value.empty()) {
                    if (!config.perspectives[k].optional) {
                        reason = "empty required perspective '" + config.perspectives[k].name + "'";
                        break;
                    }
                    value = std::string(kMissing);
                }
                ev.perspectives.push_back(std::move(value));
            }
            for (std::size_t k = 0; reason.empty() && k < extra_cols.size(); ++k)
                ev.extras[config.extras[k]] = trim(fields[extra_cols[k]]);
        }
        if (!reason.empty()) {
            if (config.strict) throw ParseError(reason, row);
            result.malformed.push_back({row, reason});
            continue;
        }
        events.push_back(std::move(ev));
    }
    if (!result.malformed.empty() && !config.drop_malformed) {
        const auto& first = result.malformed.front();
        throw ParseError(std::to_string(result.malformed.size()) + " malformed rows, first: " + first.reason,
                         first.row);
    }
    result.log = EventLog(std::move(schema), std::move(events), config.time_unit);
    return result;
}

// ---------------------------------------------------------------------------
// JSON lines
// ---------------------------------------------------------------------------

void write_jsonl(const EventLog& log, std::ostream& out) {
    json header = {{"schema", log.schema()}, {"time_unit", to_string(log.time_unit())}};
    out << header.dump() << '\n';
    for (const auto& e : log.events()) {
        json p = json::object();
        for (std::size_t k = 0; k < log.schema().size(); ++k) p[log.schema()[k]] = e.perspectives[k];
        json line = {{"case", e.case_id}, {"ts", format_timestamp(e.timestamp)}, {"row", e.row}, {"p", p}};
        if (!e.extras.empty()) line["x"] = e.extras;
        out << line.dump() << '\n';
    }
}

std::string to_jsonl(const EventLog& log) {
    std::ostringstream out;
    write_jsonl(log, out);
    return out.str();
}

EventLog read_jsonl(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty event log stream");
    json header = json::parse(line);
    if (!header.contains("schema")) throw SchemaError("first line is not an event log header");
    auto schema = header.at("schema").get<std::vector<std::string>>();
    auto unit = parse_time_unit(header.value("time_unit", std::string("days")));
    std::vector<Event> events;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            Event e;
            e.case_id = j.at("case").get<std::string>();
            e.timestamp = parse_canonical_timestamp(j.at("ts").get<std::string>());
            e.row = j.value("row", lineno - 1);
            const auto& p = j.at("p");
            for (const auto& name : schema) e.perspectives.push_back(p.at(name).get<std::string>());
            if (j.contains("x")) e.extras = j.at("x").get<std::map<std::string, std::string>>();
            events.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw ParseError(ex.what(), lineno);
        } catch (const std::invalid_argument& ex) {
            throw ParseError(ex.what(), lineno);
        }
    }
    return EventLog(std::move(schema), std::move(events), unit);
}

// ---------------------------------------------------------------------------
// Statistics and sampling
// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

json LengthStats::to_json() const {
    return {{"count", count},         {"median", median},
            {"q1", q1},               {"q3", q3},
            {"iqr", iqr},             {"outlier_threshold", outlier_threshold},
            {"outlier_count", outlier_count}, {"min_length", min_length},
            {"max_length", max_length}};
}

LengthStats pathway_length_stats(const EventLog& log) {
    if (log.case_count() == 0) throw std::invalid_argument("length statistics of an empty log");
    std::vector<double> lengths;
    for (const auto& id : log.case_ids()) lengths.push_back(static_cast<double>(log.case_length(id)));
    LengthStats s;
    s.count = lengths.size();
    s.median = quantile(lengths, 0.5);
    s.q1 = quantile(lengths, 0.25);
    s.q3 = quantile(lengths, 0.75);
    s.iqr = s.q3 - s.q1;
    s.outlier_threshold = s.q3 + 4.0 * s.iqr;
    s.outlier_count = static_cast<std::size_t>(
        std::count_if(lengths.begin(), lengths.end(), [&](double l) { return l > s.outlier_threshold; }));
    auto [mn, mx] = std::minmax_element(lengths.begin(), lengths.end());
    s.min_length = static_cast<std::size_t>(*mn);
    s.max_length = static_cast<std::size_t>(*mx);
    return s;
}

EventLog sample_pathways(const EventLog& log, std::size_t max_length, std::size_t n, std::uint64_t seed) {
    std::vector<std::string> eligible;
    for (const auto& id : log.case_ids())
        if (log.case_length(id) <= max_length) eligible.push_back(id);
    if (n > eligible.size())
        throw std::invalid_argument("requested " + std::to_string(n) + " pathways but only " +
                                    std::to_string(eligible.size()) + " are eligible (short by " +
                                    std::to_string(n - eligible.size()) + ")");
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
        std::swap(eligible[i], eligible[pick(rng)]);
    }
    eligible.resize(n);
    std::sort(eligible.begin(), eligible.end());
    return log.subset(eligible);
}

}  // namespace magpath
