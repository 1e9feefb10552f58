#pragma once
// Pipeline facade shared by the HTTP service and the command-line tool.
//
// Artifacts (datasets, MAGs, matrices, cluster sets, rendered models) live as
// files under a data directory; their ids are content hashes of what produced
// them, so repeating a request finds the stored result. Matrix and clustering
// runs are jobs executed by a worker pool.

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "magpath/clustering.hpp"
#include "magpath/dissimilarity.hpp"
#include "magpath/eventlog.hpp"
#include "magpath/mag.hpp"
#include "magpath/model_export.hpp"

namespace magpath {

/// Error with an HTTP status and a machine-readable code.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }
    nlohmann::json to_json() const { return {{"error", {{"code", code_}, {"message", what()}}}}; }

private:
    int status_;
    std::string code_;
};

/// 64-bit FNV-1a as 16 hex digits.
std::string content_id(const std::string& bytes);

struct Job {
    enum class State { Queued, Running, Done, Failed };

    std::string id;
    std::string kind;
    State state = State::Queued;
    double progress = 0;
    nlohmann::json result;
    std::string error;

    nlohmann::json to_json() const;
};

std::string to_string(Job::State s);

class Engine {
public:
    /// job_workers background threads run jobs; matrix_threads split each matrix.
    explicit Engine(std::string data_dir, unsigned job_workers = 1, unsigned matrix_threads = 1);
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const std::string& data_dir() const { return dir_; }

    nlohmann::json create_dataset(const nlohmann::json& body);
    nlohmann::json list_datasets() const;
    nlohmann::json dataset_stats(const std::string& id);
    nlohmann::json filter_preview(const std::string& id, const nlohmann::json& body);
    nlohmann::json filter_apply(const std::string& id, const nlohmann::json& body);

    nlohmann::json create_mag(const std::string& dataset, const nlohmann::json& body);
    nlohmann::json mag_info(const std::string& id);

    /// Returns the job record (state may already be done when cached).
    nlohmann::json submit_matrix(const std::string& mag, const nlohmann::json& body);
    nlohmann::json submit_clusters(const std::string& matrix, const nlohmann::json& body);
    nlohmann::json job(const std::string& id) const;
    /// Blocks until the job finishes; returns its record.
    nlohmann::json wait_job(const std::string& id) const;

    nlohmann::json cluster_set(const std::string& id);
    nlohmann::json cluster_profile(const std::string& id, const nlohmann::json& query);
    std::string cluster_profile_csv(const std::string& id, const nlohmann::json& query);

    nlohmann::json relevance(const std::string& mag, const nlohmann::json& body);
    nlohmann::json render(const std::string& mag, const nlohmann::json& body);
    std::string render_dot(const std::string& mag, const nlohmann::json& body);

    // Direct artifact access for the CLI and tests.
    std::shared_ptr<const EventLog> load_dataset(const std::string& id);
    std::shared_ptr<const Mag> load_mag(const std::string& id);
    std::shared_ptr<const DissimilarityMatrix> load_matrix_artifact(const std::string& id);
    ClusterSet load_clusters(const std::string& id);

private:
    struct JobSlot;

    std::string path(const std::string& kind, const std::string& file) const;
    std::shared_ptr<JobSlot> enqueue(const std::string& kind, std::function<nlohmann::json(JobSlot&)> work);
    std::shared_ptr<JobSlot> done_job(const std::string& kind, nlohmann::json result);
    std::shared_ptr<JobSlot> find_job(const std::string& id) const;
    void worker_loop();
    nlohmann::json store_dataset(const EventLog& log, const std::string& name, const nlohmann::json& extra);
    nlohmann::json mag_meta(const std::string& id);
    std::set<std::string> cluster_members(const nlohmann::json& selector);
    std::map<Node, double> relevance_scores(const std::string& mag_id, const nlohmann::json& selector,
                                            nlohmann::json* echo);
    ModelViewDoc build_model(const std::string& mag_id, const nlohmann::json& body);

    std::string dir_;
    unsigned matrix_threads_;

    mutable std::mutex store_mutex_;
    std::map<std::string, std::string> names_;  // dataset name -> id
    std::map<std::string, std::shared_ptr<const EventLog>> logs_;
    std::map<std::string, std::shared_ptr<const Mag>> mags_;
    std::map<std::string, std::shared_ptr<const DissimilarityMatrix>> matrices_;

    mutable std::mutex job_mutex_;
    mutable std::condition_variable job_cv_;
    std::map<std::string, std::shared_ptr<JobSlot>> jobs_;
    std::deque<std::shared_ptr<JobSlot>> queue_;
    std::size_t job_counter_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::string data_dir = "magpath-data";
    unsigned workers = 1;
    unsigned matrix_threads = 1;

    static ServiceConfig from_json(const nlohmann::json& j);
};

/// REST front end over an Engine.
class HttpService {
public:
    explicit HttpService(Engine& engine);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); blocking.
    void listen();
    /// bind + listen on a background thread.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace magpath
