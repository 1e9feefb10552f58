// Command-line front end. Each subcommand mirrors one service endpoint: the
// request body comes from --config (a JSON file) and flags override its keys.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "magpath/service.hpp"
#include "magpath/synthetic.hpp"

using nlohmann::json;
using namespace magpath;

namespace {

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream s;
        s << std::cin.rdbuf();
        return s.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw ApiError(400, "invalid_json", path + ": " + e.what());
    }
    if (!j.is_object()) throw ApiError(400, "invalid_json", path + ": the config must be a JSON object");
    return j;
}

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <class T>
void put(json& j, const char* outer, const char* key, const std::optional<T>& v) {
    if (!v) return;
    if (!j.contains(outer) || !j[outer].is_object()) j[outer] = json::object();
    j[outer][key] = *v;
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

void emit_text(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
}

json finish(Engine& e, const json& job) {
    auto done = e.wait_job(job.at("id").get<std::string>());
    if (done.at("state") == "failed") throw std::runtime_error(done.value("error", std::string("job failed")));
    return done;
}

// Without declared perspectives every header column other than the case and
// date columns becomes one.
void infer_perspectives(json& body) {
    json& cfg = body["config"];
    if (cfg.is_null()) cfg = json::object();
    if (cfg.contains("perspectives")) return;
    const auto& content = body.at("content").get_ref<const std::string&>();
    const std::string delim = cfg.value("delimiter", std::string(","));
    const std::string case_col = cfg.value("case_column", std::string("case_id"));
    const std::string date_col = cfg.value("timestamp_column", std::string("date"));
    std::string header = content.substr(0, content.find('\n'));
    if (!header.empty() && header.back() == '\r') header.pop_back();
    json persp = json::array();
    std::size_t pos = 0;
    while (pos <= header.size()) {
        const auto next = std::min(header.find(delim, pos), header.size());
        const auto col = header.substr(pos, next - pos);
        if (!col.empty() && col != case_col && col != date_col) persp.push_back({{"name", col}, {"optional", true}});
        pos = next + delim.size();
    }
    cfg["perspectives"] = persp;
}

HttpService* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int report(int status, const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
    return status >= 500 ? 3 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-aspect pathway mining"};
    app.require_subcommand(1);
    std::string data_dir = "magpath-data";
    app.add_option("--data-dir", data_dir, "Artifact directory")->capture_default_str();
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads for matrix computation")->capture_default_str();

    std::string config;
    auto with_config = [&](CLI::App* sub) { sub->add_option("--config", config, "JSON request body"); };

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Store an event log as a dataset");
    with_config(ingest);
    std::string input;
    std::optional<std::string> name, format;
    ingest->add_option("input", input, "CSV or JSONL file ('-' for stdin)")->required();
    ingest->add_option("--name", name, "Dataset name");
    ingest->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

    // stats
    auto* stats = app.add_subcommand("stats", "Dataset summary and pathway length statistics");
    std::string target;
    stats->add_option("dataset", target)->required();

    // list
    app.add_subcommand("datasets", "List stored datasets");

    // filter
    auto* filter = app.add_subcommand("filter", "Typical-code filtering against a matched control");
    with_config(filter);
    std::string filter_mode;
    filter->add_option("mode", filter_mode, "preview or apply")->required()->check(CLI::IsMember({"preview", "apply"}));
    filter->add_option("dataset", target)->required();
    std::optional<std::string> control;
    std::optional<double> theta_p, theta_o, min_p, min_o, max_p, max_o;
    std::optional<std::uint64_t> seed;
    filter->add_option("--control", control, "Control pool dataset id");
    filter->add_option("--name", name, "Name of the filtered dataset (apply)");
    filter->add_option("--theta-p", theta_p);
    filter->add_option("--theta-o", theta_o);
    filter->add_option("--min-p", min_p);
    filter->add_option("--min-o", min_o);
    filter->add_option("--max-p", max_p);
    filter->add_option("--max-o", max_o);
    filter->add_option("--seed", seed);

    // mag
    auto* mag = app.add_subcommand("mag", "Build a MAG from a dataset");
    with_config(mag);
    mag->add_option("dataset", target)->required();
    std::vector<std::string> aspects;
    mag->add_option("--aspects", aspects, "Aspects to keep")->delimiter(',');
    bool no_endpoints = false;
    mag->add_flag("--no-endpoints", no_endpoints, "Omit START/END nodes");

    // matrix
    auto* matrix = app.add_subcommand("matrix", "Pairwise dissimilarity matrix of a MAG's pathways");
    with_config(matrix);
    matrix->add_option("mag", target)->required();
    std::optional<double> delta, epsilon, omega, penalty;
    std::optional<std::size_t> sample_n, max_length;
    matrix->add_option("--delta", delta);
    matrix->add_option("--epsilon", epsilon);
    matrix->add_option("--omega", omega);
    matrix->add_option("--penalty", penalty);
    matrix->add_option("--sample", sample_n, "Number of pathways to sample");
    matrix->add_option("--max-length", max_length, "Longest pathway eligible for sampling");
    matrix->add_option("--seed", seed);
    std::string csv_out;
    matrix->add_option("--csv", csv_out, "Also write the matrix as CSV");

    // cluster
    auto* cluster = app.add_subcommand("cluster", "Overlapping clusters of a matrix");
    with_config(cluster);
    cluster->add_option("matrix", target)->required();
    std::optional<std::size_t> runs, seeds, min_size;
    std::optional<std::uint64_t> first_seed;
    std::optional<double> tolerance;
    cluster->add_option("--runs", runs);
    cluster->add_option("--seeds", seeds);
    cluster->add_option("--first-seed", first_seed);
    cluster->add_option("--tolerance", tolerance);
    cluster->add_option("--min-size", min_size);

    // profile
    auto* profile = app.add_subcommand("profile", "Frequent aspect pairs per cluster");
    with_config(profile);
    profile->add_option("clusters", target)->required();
    std::optional<std::string> first, second;
    std::optional<std::size_t> top_k;
    profile->add_option("--first", first);
    profile->add_option("--second", second);
    profile->add_option("--top", top_k);
    bool as_csv = false;
    profile->add_flag("--csv", as_csv, "CSV instead of JSON");

    // relevance
    auto* relevance = app.add_subcommand("relevance", "Node relevance of a MAG");
    with_config(relevance);
    relevance->add_option("mag", target)->required();
    std::optional<double> w1, w2, alpha;
    std::optional<std::string> scope, cluster_set;
    std::optional<std::size_t> cluster_index;
    auto relevance_flags = [&](CLI::App* sub) {
        sub->add_option("--w1", w1);
        sub->add_option("--w2", w2);
        sub->add_option("--alpha", alpha);
        sub->add_option("--r0-scope", scope)->check(CLI::IsMember({"cohort", "cluster"}));
        sub->add_option("--clusters", cluster_set, "Cluster set id");
        sub->add_option("--cluster-index", cluster_index);
    };
    relevance_flags(relevance);

    // render
    auto* render = app.add_subcommand("render", "Simplified process model document");
    with_config(render);
    render->add_option("mag", target)->required();
    relevance_flags(render);
    std::optional<double> min_r, max_r;
    render->add_option("--min", min_r, "Minimum relevance kept");
    render->add_option("--max", max_r, "Maximum relevance kept");
    std::optional<std::string> lane;
    std::optional<std::size_t> hide_below;
    render->add_option("--lane", lane, "Lane aspect");
    render->add_option("--hide-below", hide_below, "Hide edges followed by fewer patients");
    std::string render_format = "json";
    render->add_option("--format", render_format)->check(CLI::IsMember({"json", "dot"}));
    std::string out_path;
    render->add_option("-o,--output", out_path, "Output file");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    with_config(serve);
    std::optional<std::string> host;
    std::optional<int> port;
    std::optional<unsigned> workers;
    serve->add_option("--host", host);
    serve->add_option("--port", port, "0 picks a free port");
    serve->add_option("--workers", workers, "Job worker threads");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic pregnancy-like event log as CSV");
    std::size_t cases = 200;
    std::uint64_t synth_seed = 7;
    synth_cmd->add_option("--cases", cases)->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
    synth_cmd->add_option("-o,--output", out_path, "Output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            PregnancyOptions o;
            o.cases = cases;
            o.seed = synth_seed;
            std::ostringstream s;
            write_csv(synthetic_pregnancy_log(o), s);
            emit_text(s.str(), out_path);
            return 0;
        }

        json body = load_config(config);

        if (*serve) {
            auto c = ServiceConfig::from_json(body);
            if (!app.get_option("--data-dir")->empty()) c.data_dir = data_dir;
            if (!app.get_option("--threads")->empty()) c.matrix_threads = threads;
            if (host) c.host = *host;
            if (port) c.port = *port;
            if (workers) c.workers = *workers;
            Engine engine(c.data_dir, c.workers, c.matrix_threads);
            HttpService service(engine);
            const int bound = service.bind(c.host, c.port);
            std::cout << json{{"listening", c.host + ":" + std::to_string(bound)}}.dump() << std::endl;
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.listen();
            g_service = nullptr;
            return 0;
        }

        Engine engine(data_dir, 1, threads);

        if (*ingest) {
            put(body, "name", name);
            put(body, "format", format);
            if (!body.contains("format")) {
                const bool jsonl = input.size() > 6 && input.substr(input.size() - 6) == ".jsonl";
                body["format"] = jsonl ? "jsonl" : "csv";
            }
            body["content"] = slurp(input);
            if (body["format"] == "csv") infer_perspectives(body);
            emit(engine.create_dataset(body));
        } else if (*stats) {
            emit(engine.dataset_stats(target));
        } else if (app.got_subcommand("datasets")) {
            emit(engine.list_datasets());
        } else if (*filter) {
            put(body, "control", control);
            put(body, "seed", seed);
            put(body, "thresholds", "theta_p", theta_p);
            put(body, "thresholds", "theta_o", theta_o);
            put(body, "thresholds", "min_p", min_p);
            put(body, "thresholds", "min_o", min_o);
            put(body, "thresholds", "max_p", max_p);
            put(body, "thresholds", "max_o", max_o);
            if (filter_mode == "preview") {
                emit(engine.filter_preview(target, body));
            } else {
                put(body, "name", name);
                emit(engine.filter_apply(target, body));
            }
        } else if (*mag) {
            if (!aspects.empty()) body["aspects"] = aspects;
            if (no_endpoints) body["endpoints"] = false;
            emit(engine.create_mag(target, body));
        } else if (*matrix) {
            put(body, "params", "delta", delta);
            put(body, "params", "epsilon", epsilon);
            put(body, "params", "omega_a", omega);
            put(body, "params", "penalty", penalty);
            put(body, "sample", "n", sample_n);
            put(body, "sample", "max_length", max_length);
            put(body, "sample", "seed", seed);
            auto done = finish(engine, engine.submit_matrix(target, body));
            if (!csv_out.empty()) {
                std::ostringstream s;
                write_matrix_csv(*engine.load_matrix_artifact(done.at("result").at("matrix")), s);
                emit_text(s.str(), csv_out);
            }
            emit(done.at("result"));
        } else if (*cluster) {
            put(body, "runs", runs);
            put(body, "seeds", seeds);
            put(body, "first_seed", first_seed);
            put(body, "tolerance", tolerance);
            put(body, "min_size", min_size);
            auto done = finish(engine, engine.submit_clusters(target, body));
            emit(engine.cluster_set(done.at("result").at("clusters")));
        } else if (*profile) {
            put(body, "first", first);
            put(body, "second", second);
            put(body, "top_k", top_k);
            if (as_csv)
                std::cout << engine.cluster_profile_csv(target, body);
            else
                emit(engine.cluster_profile(target, body));
        } else if (*relevance || *render) {
            json& rel = *relevance ? body : body["relevance"];
            if (*render && !(w1 || w2 || alpha || scope || cluster_set) && rel.is_null()) {
                body.erase("relevance");
            } else {
                if (rel.is_null()) rel = json::object();
                put(rel, "w1", w1);
                put(rel, "w2", w2);
                put(rel, "alpha", alpha);
                put(rel, "r0_scope", scope);
                put(rel, "cluster", "clusters", cluster_set);
                put(rel, "cluster", "index", cluster_index);
            }
            if (*relevance) {
                emit(engine.relevance(target, body));
            } else {
                put(body, "thresholds", "min", min_r);
                put(body, "thresholds", "max", max_r);
                put(body, "render", "lane_aspect", lane);
                put(body, "render", "hide_below_frequency", hide_below);
                if (render_format == "dot")
                    emit_text(engine.render_dot(target, body), out_path);
                else
                    emit_text(engine.render(target, body).dump(2) + "\n", out_path);
            }
        }
        return 0;
    } catch (const ApiError& e) {
        return report(e.status(), e.code(), e.what());
    } catch (const ParseError& e) {
        return report(400, "parse_error", e.what());
    } catch (const SchemaError& e) {
        return report(400, "schema_error", e.what());
    } catch (const json::exception& e) {
        return report(400, "invalid_request", e.what());
    } catch (const std::invalid_argument& e) {
        return report(400, "invalid_argument", e.what());
    } catch (const std::out_of_range& e) {
        return report(400, "invalid_argument", e.what());
    } catch (const std::domain_error& e) {
        return report(400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
        return report(500, "internal", e.what());
    }
}
