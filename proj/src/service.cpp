#include "magpath/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "magpath/cohort_filter.hpp"
#include "magpath/model_export.hpp"
#include "magpath/relevance.hpp"

namespace magpath {

namespace fs = std::filesystem;
using nlohmann::json;

std::string content_id(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string to_string(Job::State s) {
    switch (s) {
        case Job::State::Queued: return "queued";
        case Job::State::Running: return "running";
        case Job::State::Done: return "done";
        case Job::State::Failed: return "failed";
    }
    return "unknown";
}

json Job::to_json() const {
    json j = {{"id", id}, {"kind", kind}, {"state", to_string(state)}, {"progress", progress}};
    j["result"] = result.is_null() ? json(nullptr) : result;
    if (!error.empty()) j["error"] = error;
    return j;
}

struct Engine::JobSlot {
    mutable std::mutex m;
    Job job;
    std::function<json(JobSlot&)> work;

    void set_progress(double p) {
        std::lock_guard lock(m);
        job.progress = p;
    }
    Job snapshot() const {
        std::lock_guard lock(m);
        return job;
    }
};

namespace {

ApiError not_found(const std::string& what, const std::string& id) {
    return ApiError(404, "not_found", what + " '" + id + "' does not exist");
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

std::vector<std::string> activity_aspects(const Mag& mag) {
    std::vector<std::string> out;
    for (const auto& a : mag.aspects)
        if (a != kSequence) out.push_back(a);
    return out;
}

}  // namespace

Engine::Engine(std::string data_dir, unsigned job_workers, unsigned matrix_threads)
    : dir_(std::move(data_dir)), matrix_threads_(std::max(1u, matrix_threads)) {
    for (const char* sub : {"datasets", "mags", "matrices", "clusters", "models"}) fs::create_directories(fs::path(dir_) / sub);
    for (const auto& entry : fs::directory_iterator(fs::path(dir_) / "datasets")) {
        if (entry.path().extension() != ".json") continue;
        try {
            auto meta = json::parse(read_file(entry.path()));
            names_[meta.at("name").get<std::string>()] = meta.at("id").get<std::string>();
        } catch (const std::exception&) {
            // unreadable metadata; the dataset stays reachable by id only
        }
    }
    for (unsigned k = 0; k < std::max(1u, job_workers); ++k) workers_.emplace_back([this] { worker_loop(); });
}

Engine::~Engine() {
    {
        std::lock_guard lock(job_mutex_);
        stopping_ = true;
    }
    job_cv_.notify_all();
    for (auto& t : workers_) t.join();
}

std::string Engine::path(const std::string& kind, const std::string& file) const {
    return (fs::path(dir_) / kind / file).string();
}

// ---------------------------------------------------------------------------
// Jobs
// ---------------------------------------------------------------------------

std::shared_ptr<Engine::JobSlot> Engine::enqueue(const std::string& kind, std::function<json(JobSlot&)> work) {
    auto slot = std::make_shared<JobSlot>();
    slot->job.kind = kind;
    slot->work = std::move(work);
    {
        std::lock_guard lock(job_mutex_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "job-%06zu", ++job_counter_);
        slot->job.id = buf;
        jobs_[slot->job.id] = slot;
        queue_.push_back(slot);
    }
    job_cv_.notify_all();
    return slot;
}

std::shared_ptr<Engine::JobSlot> Engine::done_job(const std::string& kind, json result) {
    auto slot = std::make_shared<JobSlot>();
    slot->job.kind = kind;
    slot->job.state = Job::State::Done;
    slot->job.progress = 1.0;
    slot->job.result = std::move(result);
    std::lock_guard lock(job_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06zu", ++job_counter_);
    slot->job.id = buf;
    jobs_[slot->job.id] = slot;
    return slot;
}

void Engine::worker_loop() {
    for (;;) {
        std::shared_ptr<JobSlot> slot;
        {
            std::unique_lock lock(job_mutex_);
            job_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            slot = queue_.front();
            queue_.pop_front();
        }
        {
            std::lock_guard lock(slot->m);
            slot->job.state = Job::State::Running;
        }
        json result;
        std::string error;
        try {
            result = slot->work(*slot);
        } catch (const std::exception& e) {
            error = e.what();
            if (error.empty()) error = "job failed";
        }
        {
            std::lock_guard lock(slot->m);
            if (error.empty()) {
                slot->job.state = Job::State::Done;
                slot->job.progress = 1.0;
                slot->job.result = std::move(result);
            } else {
                slot->job.state = Job::State::Failed;
                slot->job.error = error;
            }
            slot->work = nullptr;
        }
        {
            // wake waiters; taking the lock orders the notify after their predicate check
            std::lock_guard lock(job_mutex_);
        }
        job_cv_.notify_all();
    }
}

std::shared_ptr<Engine::JobSlot> Engine::find_job(const std::string& id) const {
    std::lock_guard lock(job_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw not_found("job", id);
    return it->second;
}

json Engine::job(const std::string& id) const { return find_job(id)->snapshot().to_json(); }

json Engine::wait_job(const std::string& id) const {
    auto slot = find_job(id);
    std::unique_lock lock(job_mutex_);
    job_cv_.wait(lock, [&] {
        auto s = slot->snapshot().state;
        return s == Job::State::Done || s == Job::State::Failed;
    });
    return slot->snapshot().to_json();
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

std::shared_ptr<const EventLog> Engine::load_dataset(const std::string& id) {
    {
        std::lock_guard lock(store_mutex_);
        auto it = logs_.find(id);
        if (it != logs_.end()) return it->second;
    }
    if (!valid_id(id) || !fs::exists(path("datasets", id + ".jsonl"))) throw not_found("dataset", id);
    std::ifstream in(path("datasets", id + ".jsonl"));
    auto log = std::make_shared<const EventLog>(read_jsonl(in));
    std::lock_guard lock(store_mutex_);
    return logs_.emplace(id, log).first->second;
}

json Engine::store_dataset(const EventLog& log, const std::string& name, const json& extra) {
    if (name.empty()) throw ApiError(400, "invalid_request", "a dataset needs a non-empty name");
    if (log.events().empty()) throw ApiError(400, "empty_dataset", "the dataset has no events");
    const auto content = to_jsonl(log);
    const auto id = content_id(content);
    json meta = {{"id", id},
                 {"name", name},
                 {"cases", log.case_count()},
                 {"events", log.events().size()},
                 {"schema", log.schema()},
                 {"time_unit", to_string(log.time_unit())}};
    for (const auto& [k, v] : extra.items()) meta[k] = v;

    std::lock_guard lock(store_mutex_);
    if (names_.count(name)) throw ApiError(409, "duplicate_name", "a dataset named '" + name + "' already exists");
    if (fs::exists(path("datasets", id + ".jsonl")))
        throw ApiError(409, "duplicate_content", "identical content is already stored as dataset " + id);
    write_file(path("datasets", id + ".jsonl"), content);
    write_file(path("datasets", id + ".json"), meta.dump(2));
    names_[name] = id;
    logs_[id] = std::make_shared<const EventLog>(log);
    return meta;
}

json Engine::create_dataset(const json& body) {
    const auto name = body.at("name").get<std::string>();
    const auto format = body.value("format", std::string("csv"));
    const auto content = body.at("content").get<std::string>();
    std::istringstream in(content);
    if (format == "jsonl") return store_dataset(read_jsonl(in), name, json::object());
    if (format != "csv") throw ApiError(400, "invalid_request", "format must be 'csv' or 'jsonl'");
    const auto config = ParseConfig::from_json(body.at("config"));
    auto parsed = parse_event_log(in, config);
    json malformed = json::array();
    for (const auto& m : parsed.malformed) malformed.push_back({{"row", m.row}, {"reason", m.reason}});
    return store_dataset(parsed.log, name, {{"malformed", malformed}});
}

json Engine::list_datasets() const {
    json out = json::array();
    std::lock_guard lock(store_mutex_);
    for (const auto& [name, id] : names_) out.push_back({{"id", id}, {"name", name}});
    return out;
}

json Engine::dataset_stats(const std::string& id) {
    auto log = load_dataset(id);
    auto meta = json::parse(read_file(path("datasets", id + ".json")));
    meta["length_stats"] = pathway_length_stats(*log).to_json();
    return meta;
}

namespace {

struct FilterInputs {
    FilterThresholds thresholds;
    FilterPerspectives names;
    DiagnosisRule rule;
    CodeSet whitelist;
    FrequencyTable procedures;
    FrequencyTable occupations;
    ControlSample control;
};

FilterInputs filter_inputs(Engine& e, const EventLog& cohort, const json& body) {
    FilterInputs f;
    f.thresholds = FilterThresholds::from_json(body.value("thresholds", json::object()));
    f.thresholds.validate();
    if (body.contains("perspectives")) {
        const auto& p = body.at("perspectives");
        f.names.diagnosis = p.value("diagnosis", f.names.diagnosis);
        f.names.procedure = p.value("procedure", f.names.procedure);
        f.names.occupation = p.value("occupation", f.names.occupation);
    }
    if (body.contains("invalid_diagnoses")) f.rule.invalid_codes = body.at("invalid_diagnoses").get<CodeSet>();
    if (body.contains("diagnosis_whitelist")) f.whitelist = body.at("diagnosis_whitelist").get<CodeSet>();
    const auto pool = e.load_dataset(body.at("control").get<std::string>());
    if (body.value("match_lengths", true))
        f.control = matched_control_sample(cohort, *pool, body.value("seed", std::uint64_t{1}));
    else
        f.control.control = *pool;
    f.procedures = build_frequency_table(cohort, f.control.control, f.names.procedure);
    f.occupations = build_frequency_table(cohort, f.control.control, f.names.occupation);
    return f;
}

}  // namespace

json Engine::filter_preview(const std::string& id, const json& body) {
    auto cohort = load_dataset(id);
    const auto f = filter_inputs(*this, *cohort, body);
    const auto report = preview_filter(f.thresholds, f.procedures, f.occupations, *cohort, f.whitelist,
                                       body.value("sample_size", std::size_t{20}), f.names, f.rule);
    auto out = report.to_json();
    out["control"] = {{"cases", f.control.control.case_count()}, {"skipped", f.control.skipped}};
    out["thresholds"] = f.thresholds.to_json();
    return out;
}

json Engine::filter_apply(const std::string& id, const json& body) {
    auto cohort = load_dataset(id);
    const auto name = body.at("name").get<std::string>();
    const auto f = filter_inputs(*this, *cohort, body);
    const auto procs = select_typical_codes(f.procedures, f.thresholds.theta_p, f.thresholds.min_p, f.thresholds.max_p);
    const auto occs = select_typical_codes(f.occupations, f.thresholds.theta_o, f.thresholds.min_o, f.thresholds.max_o);
    const auto result = filter_events(*cohort, f.whitelist, procs, occs, f.names, f.rule);
    if (result.log.events().empty())
        throw ApiError(400, "empty_result", "the thresholds keep no event of dataset " + id);
    auto meta = store_dataset(result.log, name,
                              {{"parent", id},
                               {"filter", {{"thresholds", f.thresholds.to_json()},
                                           {"typical_procedures", procs},
                                           {"typical_occupations", occs}}}});
    meta["emptied"] = result.emptied;
    meta["kept_by_diagnosis"] = result.kept_by_diagnosis;
    meta["kept_by_codes"] = result.kept_by_codes;
    return meta;
}

// ---------------------------------------------------------------------------
// MAGs
// ---------------------------------------------------------------------------

std::shared_ptr<const Mag> Engine::load_mag(const std::string& id) {
    {
        std::lock_guard lock(store_mutex_);
        auto it = mags_.find(id);
        if (it != mags_.end()) return it->second;
    }
    if (!valid_id(id) || !fs::exists(path("mags", id + ".json"))) throw not_found("MAG", id);
    auto mag = std::make_shared<const Mag>(Mag::from_json(json::parse(read_file(path("mags", id + ".json")))));
    std::lock_guard lock(store_mutex_);
    return mags_.emplace(id, mag).first->second;
}

json Engine::mag_meta(const std::string& id) {
    if (!valid_id(id) || !fs::exists(path("mags", id + ".meta.json"))) throw not_found("MAG", id);
    return json::parse(read_file(path("mags", id + ".meta.json")));
}

json Engine::create_mag(const std::string& dataset, const json& body) {
    auto log = load_dataset(dataset);
    std::vector<std::string> aspects = body.contains("aspects") ? body.at("aspects").get<std::vector<std::string>>()
                                                                : log->schema();
    const bool endpoints = body.value("endpoints", true);
    const auto id = content_id(dataset + "\n" + json(aspects).dump() + (endpoints ? "\n1" : "\n0"));
    if (fs::exists(path("mags", id + ".meta.json"))) return mag_meta(id);
    for (const auto& a : aspects)
        if (a != kSequence && !log->find_perspective(a))
            throw ApiError(400, "unknown_aspect", "dataset " + dataset + " has no perspective '" + a + "'");
    const auto mag = build_mag(*log, aspects, endpoints);
    json meta = {{"id", id},
                 {"dataset", dataset},
                 {"aspects", mag.aspects},
                 {"endpoints", endpoints},
                 {"nodes", mag.nodes.size()},
                 {"real_nodes", mag.real_node_count()},
                 {"edges", mag.edges.size()},
                 {"patients", mag.patients().size()}};
    write_file(path("mags", id + ".json"), mag.to_json().dump());
    write_file(path("mags", id + ".meta.json"), meta.dump(2));
    std::lock_guard lock(store_mutex_);
    mags_[id] = std::make_shared<const Mag>(mag);
    return meta;
}

json Engine::mag_info(const std::string& id) { return mag_meta(id); }

// ---------------------------------------------------------------------------
// Matrices and clusters
// ---------------------------------------------------------------------------

std::shared_ptr<const DissimilarityMatrix> Engine::load_matrix_artifact(const std::string& id) {
    {
        std::lock_guard lock(store_mutex_);
        auto it = matrices_.find(id);
        if (it != matrices_.end()) return it->second;
    }
    if (!valid_id(id) || !fs::exists(path("matrices", id + ".bin.json"))) throw not_found("matrix", id);
    auto m = std::make_shared<const DissimilarityMatrix>(load_matrix(path("matrices", id + ".bin")));
    std::lock_guard lock(store_mutex_);
    return matrices_.emplace(id, m).first->second;
}

json Engine::submit_matrix(const std::string& mag_id, const json& body) {
    auto mag = load_mag(mag_id);
    const auto params = DissimParams::from_json(body.value("params", json::object()), activity_aspects(*mag));
    auto all = extract_pathways(*mag);

    json sample = body.value("sample", json(nullptr));
    std::vector<std::string> ids;
    for (const auto& [id, p] : all) ids.push_back(id);
    if (!sample.is_null()) {
        const auto max_len = sample.value("max_length", std::numeric_limits<std::size_t>::max());
        std::vector<std::string> eligible;
        for (const auto& id : ids)
            if (all.at(id).size() <= max_len) eligible.push_back(id);
        const auto n = sample.value("n", eligible.size());
        if (n > eligible.size())
            throw ApiError(400, "sample_too_large", "only " + std::to_string(eligible.size()) +
                                                        " pathways are eligible, " + std::to_string(n) + " requested");
        std::mt19937_64 rng(sample.value("seed", std::uint64_t{1}));
        for (std::size_t k = 0; k < n; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, eligible.size() - 1);
            std::swap(eligible[k], eligible[pick(rng)]);
        }
        eligible.resize(n);
        std::sort(eligible.begin(), eligible.end());
        ids = std::move(eligible);
    }
    if (ids.size() < 2) throw ApiError(400, "too_few_pathways", "a matrix needs at least two pathways");

    const auto id = content_id(mag_id + "\n" + params.to_json().dump() + "\n" + sample.dump());
    const json result = {{"matrix", id}, {"size", ids.size()}, {"mag", mag_id}};
    if (fs::exists(path("matrices", id + ".bin.json"))) return done_job("matrix", result)->snapshot().to_json();

    std::vector<std::pair<std::string, Pathway>> pathways;
    for (const auto& pid : ids) pathways.emplace_back(pid, all.at(pid));
    const unsigned threads = matrix_threads_;
    const json side = {{"mag", mag_id}, {"dissimilarity", params.to_json()}, {"sample", sample}};
    auto slot = enqueue("matrix", [this, pathways = std::move(pathways), params, threads, side, id, result](JobSlot& s) {
        const auto m = pairwise_matrix(pathways, params, threads, [&s](std::size_t done, std::size_t total) {
            s.set_progress(total ? static_cast<double>(done) / static_cast<double>(total) : 1.0);
        });
        const auto target = path("matrices", id + ".bin");
        const auto tmp = path("matrices", id + ".partial");
        save_matrix(m, tmp, side);
        fs::rename(tmp + ".json", target + ".json.tmp");
        fs::rename(tmp, target);
        fs::rename(target + ".json.tmp", target + ".json");
        return result;
    });
    return slot->snapshot().to_json();
}

json Engine::submit_clusters(const std::string& matrix_id, const json& body) {
    if (!valid_id(matrix_id) || !fs::exists(path("matrices", matrix_id + ".bin.json")))
        throw not_found("matrix", matrix_id);
    DetectorOptions o;
    o.runs = body.value("runs", o.runs);
    o.seeds = body.value("seeds", o.seeds);
    o.first_seed = body.value("first_seed", o.first_seed);
    o.tolerance = body.value("tolerance", o.tolerance);
    o.min_size = body.value("min_size", o.min_size);
    o.max_overlap = body.value("max_overlap", o.max_overlap);
    if (o.runs == 0 || o.seeds == 0) throw ApiError(400, "invalid_argument", "runs and seeds must be positive");
    if (!(o.tolerance > 0 && o.tolerance <= 1)) throw ApiError(400, "invalid_argument", "tolerance must lie in (0, 1]");
    const json options = {{"runs", o.runs},           {"seeds", o.seeds},
                          {"first_seed", o.first_seed}, {"tolerance", o.tolerance},
                          {"min_size", o.min_size},   {"max_overlap", o.max_overlap}};
    const auto id = content_id(matrix_id + "\n" + options.dump());
    if (fs::exists(path("clusters", id + ".json"))) {
        const auto stored = json::parse(read_file(path("clusters", id + ".json")));
        return done_job("clusters", {{"clusters", id},
                                     {"count", stored.at("set").at("clusters").size()},
                                     {"singletons", stored.at("set").at("singletons").size()}})
            ->snapshot()
            .to_json();
    }
    auto slot = enqueue("clusters", [this, matrix_id, o, options, id](JobSlot& s) {
        json side_params;
        const auto m = load_matrix_artifact(matrix_id);
        load_matrix(path("matrices", matrix_id + ".bin"), &side_params);
        s.set_progress(0.1);
        const auto g = similarity_graph(*m);
        const auto set = detect_overlapping_communities(g, o);
        s.set_progress(0.9);
        json ccc = nullptr;
        try {
            ccc = cophenetic_correlation(*m, average_linkage_dendrogram(*m));
        } catch (const std::domain_error&) {
        }
        const json stored = {{"id", id},
                             {"matrix", matrix_id},
                             {"mag", side_params.value("mag", std::string())},
                             {"options", options},
                             {"ccc", ccc},
                             {"set", set.to_json()}};
        write_file(path("clusters", id + ".json"), stored.dump(2));
        return json{{"clusters", id}, {"count", set.clusters.size()}, {"singletons", set.singletons.size()}};
    });
    return slot->snapshot().to_json();
}

ClusterSet Engine::load_clusters(const std::string& id) {
    return ClusterSet::from_json(cluster_set(id).at("set"));
}

json Engine::cluster_set(const std::string& id) {
    if (!valid_id(id) || !fs::exists(path("clusters", id + ".json"))) throw not_found("cluster set", id);
    return json::parse(read_file(path("clusters", id + ".json")));
}

namespace {

std::size_t query_size(const json& q, const char* key, std::size_t def) {
    if (!q.contains(key)) return def;
    const auto& v = q.at(key);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            auto n = std::stoul(v.get<std::string>(), &used);
            if (used == v.get<std::string>().size()) return n;
        } catch (const std::exception&) {
        }
    }
    throw ApiError(400, "invalid_argument", std::string(key) + " must be a nonnegative integer");
}

}  // namespace

json Engine::cluster_profile(const std::string& id, const json& query) {
    const auto stored = cluster_set(id);
    const auto set = ClusterSet::from_json(stored.at("set"));
    const auto dataset = mag_meta(stored.at("mag").get<std::string>()).at("dataset").get<std::string>();
    auto log = load_dataset(dataset);
    const auto profile = cluster_frequency_profile(
        set, *log, {query.value("first", std::string("intervention")), query.value("second", std::string("occupation"))});
    auto out = profile.to_json(query_size(query, "top_k", 0));
    out["clusters_id"] = id;
    out["singletons"] = set.singletons.size();
    return out;
}

std::string Engine::cluster_profile_csv(const std::string& id, const json& query) {
    const auto stored = cluster_set(id);
    const auto set = ClusterSet::from_json(stored.at("set"));
    const auto dataset = mag_meta(stored.at("mag").get<std::string>()).at("dataset").get<std::string>();
    auto log = load_dataset(dataset);
    const auto profile = cluster_frequency_profile(
        set, *log, {query.value("first", std::string("intervention")), query.value("second", std::string("occupation"))});
    std::ostringstream out;
    profile.write_csv(out);
    return out.str();
}

// ---------------------------------------------------------------------------
// Relevance and models
// ---------------------------------------------------------------------------

std::set<std::string> Engine::cluster_members(const json& selector) {
    const auto set = load_clusters(selector.at("clusters").get<std::string>());
    const auto index = selector.at("index").get<std::size_t>();
    if (index >= set.clusters.size())
        throw ApiError(400, "invalid_argument", "cluster index " + std::to_string(index) + " out of range (" +
                                                    std::to_string(set.clusters.size()) + " clusters)");
    return {set.clusters[index].begin(), set.clusters[index].end()};
}

json Engine::relevance(const std::string& mag_id, const json& body) {
    auto mag = load_mag(mag_id);
    const auto params = RelevanceParams::from_json(body);
    const auto aspects = RelevanceAspects::from_json(body.value("aspects", json::object()));
    std::optional<std::set<std::string>> cluster;
    if (body.contains("cluster") && !body.at("cluster").is_null()) cluster = cluster_members(body.at("cluster"));
    const auto result = compute_relevance(*mag, params, aspects, cluster ? &*cluster : nullptr);
    auto out = result.to_json();
    out["params"] = params.to_json();
    out["mag"] = mag_id;
    if (body.contains("sweep")) {
        const auto& sw = body.at("sweep");
        const Mag target = cluster ? restrict_patients(*mag, *cluster) : *mag;
        const Mag& source = cluster && params.r0_scope == RelevanceParams::Scope::Cluster ? target : *mag;
        const auto cent = compute_aspect_centralities(source, aspects);
        std::vector<Node> sample;
        if (sw.contains("nodes")) {
            std::map<std::string, Node> by_key;
            for (const auto& n : target.nodes) by_key[node_key(n)] = n;
            for (const auto& k : sw.at("nodes")) {
                auto it = by_key.find(k.get<std::string>());
                if (it == by_key.end()) throw ApiError(400, "unknown_node", "no node '" + k.get<std::string>() + "'");
                sample.push_back(it->second);
            }
        } else {
            const auto n = sw.value("sample_size", std::size_t{10});
            for (std::size_t k = 0; k < result.nodes.size() && sample.size() < n; ++k) sample.push_back(result.nodes[k]);
        }
        out["sweep"] = parameter_sweep(target, cent, SweepGrid::from_json(sw), sample, params.tol).to_json();
    }
    return out;
}

std::map<Node, double> Engine::relevance_scores(const std::string& mag_id, const json& selector, json* echo) {
    auto mag = load_mag(mag_id);
    const auto params = RelevanceParams::from_json(selector);
    const auto aspects = RelevanceAspects::from_json(selector.value("aspects", json::object()));
    std::optional<std::set<std::string>> cluster;
    if (selector.contains("cluster") && !selector.at("cluster").is_null()) cluster = cluster_members(selector.at("cluster"));
    if (echo) *echo = params.to_json();
    return compute_relevance(*mag, params, aspects, cluster ? &*cluster : nullptr).as_map();
}

ModelViewDoc Engine::build_model(const std::string& mag_id, const json& body) {
    auto mag = load_mag(mag_id);
    const auto options = RenderOptions::from_json(body.value("render", json::object()));
    const json rel_body = body.value("relevance", json(nullptr));
    const json thresholds = body.value("thresholds", json::object());
    const double min_r = thresholds.value("min", 0.0);
    const double max_r = thresholds.contains("max") && !thresholds.at("max").is_null()
                             ? thresholds.at("max").get<double>()
                             : std::numeric_limits<double>::infinity();
    if (rel_body.is_null()) {
        if (min_r > 0 || std::isfinite(max_r))
            throw ApiError(400, "invalid_request", "relevance thresholds need relevance parameters");
        return render_model(*mag, options, nullptr);
    }
    Mag base = *mag;
    if (rel_body.contains("cluster") && !rel_body.at("cluster").is_null())
        base = restrict_patients(*mag, cluster_members(rel_body.at("cluster")));
    const auto scores = relevance_scores(mag_id, rel_body, nullptr);
    return render_model(filter_by_relevance(base, scores, min_r, max_r), options, &scores);
}

json Engine::render(const std::string& mag_id, const json& body) {
    const auto doc = build_model(mag_id, body);
    auto out = doc.to_json();
    const auto id = doc.checksum();
    write_file(path("models", id + ".json"), out.dump());
    out["id"] = id;
    return out;
}

std::string Engine::render_dot(const std::string& mag_id, const json& body) {
    std::ostringstream out;
    export_dot(build_model(mag_id, body), out);
    return out.str();
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

ServiceConfig ServiceConfig::from_json(const json& j) {
    ServiceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.workers = j.value("workers", c.workers);
    c.matrix_threads = j.value("matrix_threads", c.matrix_threads);
    return c;
}

struct HttpService::Impl {
    Engine& engine;
    httplib::Server server;
    std::thread thread;
    int port = -1;

    explicit Impl(Engine& e) : engine(e) {}
};

namespace {

json request_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw ApiError(400, "invalid_json", "the request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ApiError(400, "invalid_json", e.what());
    }
}

json query_of(const httplib::Request& req) {
    json q = json::object();
    for (const auto& [k, v] : req.params) q[k] = v;
    return q;
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ApiError& e) {
        send_error(res, e.status(), e.code(), e.what());
    } catch (const ParseError& e) {
        send_error(res, 400, "parse_error", e.what());
    } catch (const SchemaError& e) {
        send_error(res, 400, "schema_error", e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "invalid_request", e.what());
    } catch (const ConvergenceError& e) {
        send_error(res, 422, "not_converged", e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::out_of_range& e) {
        send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::domain_error& e) {
        send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::length_error& e) {
        send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

void reply(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

HttpService::HttpService(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {
    auto& s = impl_->server;
    Engine& e = engine;
    const std::string id = "([A-Za-z0-9-]+)";

    s.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, {{"status", "ok"}}); });
    s.Post("/datasets", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.create_dataset(request_body(req)), 201); });
    });
    s.Get("/datasets", [&e](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.list_datasets()); });
    });
    s.Get("/datasets/" + id + "/stats", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.dataset_stats(req.matches[1])); });
    });
    s.Post("/datasets/" + id + "/filter/preview", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.filter_preview(req.matches[1], request_body(req))); });
    });
    s.Post("/datasets/" + id + "/filter/apply", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.filter_apply(req.matches[1], request_body(req)), 201); });
    });
    s.Post("/datasets/" + id + "/mag", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.create_mag(req.matches[1], request_body(req)), 201); });
    });
    s.Get("/mags/" + id, [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.mag_info(req.matches[1])); });
    });
    s.Post("/mags/" + id + "/matrix", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.submit_matrix(req.matches[1], request_body(req)), 202); });
    });
    s.Post("/matrices/" + id + "/clusters", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.submit_clusters(req.matches[1], request_body(req)), 202); });
    });
    s.Get("/clusters/" + id, [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.cluster_set(req.matches[1])); });
    });
    s.Get("/clusters/" + id + "/profile", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto q = query_of(req);
            if (q.value("format", std::string("json")) == "csv") {
                res.status = 200;
                res.set_content(e.cluster_profile_csv(req.matches[1], q), "text/csv");
            } else {
                reply(res, e.cluster_profile(req.matches[1], q));
            }
        });
    });
    s.Post("/mags/" + id + "/relevance", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.relevance(req.matches[1], request_body(req))); });
    });
    s.Post("/mags/" + id + "/model", [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (req.has_param("format") && req.get_param_value("format") == "dot") {
                res.status = 200;
                res.set_content(e.render_dot(req.matches[1], request_body(req)), "text/vnd.graphviz");
            } else {
                reply(res, e.render(req.matches[1], request_body(req)));
            }
        });
    });
    s.Get("/jobs/" + id, [&e](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, e.job(req.matches[1])); });
    });
    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return impl_->port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

int HttpService::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace magpath
