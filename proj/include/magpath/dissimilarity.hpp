#pragma once
// Time-aware alignment dissimilarity between patient pathways.
//
// Two pathways are compared by aligning activity tuples that are similar
// enough (activity distance <= delta) and whose elapsed time since the
// previous alignment differs by at most epsilon. Each unaligned event costs a
// penalty; an alignment costs omega * Dist_A + (1 - omega) * Dist_T, except the
// first alignment, which has no time reference and costs omega * Dist_A only.
//
// `dissimilarity` evaluates the recursion as a dynamic program over
// (i, j, p, q): suffix starts i, j and the last aligned pair (p, q), giving
// O(m^2 m'^2) time. `dissimilarity_bruteforce` is the literal recursion and is
// kept as an oracle for small inputs.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magpath/mag.hpp"

namespace magpath {

/// 0 same intervention and occupation, 0.3 same intervention only,
/// 0.7 same occupation only, 1 otherwise.
double dist_a_io(const std::string& intervention1, const std::string& occupation1, const std::string& intervention2,
                 const std::string& occupation2);

/// 0.7 * diagnosis term + 0.3 * intervention term. The diagnosis term is 0 on a
/// full 4-character match, 0.3 when the first 3 characters match, else 1.
/// Codes shorter than 3 characters fall into "otherwise".
double dist_a_di(const std::string& diagnosis1, const std::string& intervention1, const std::string& diagnosis2,
                 const std::string& intervention2);

/// |t - t'| / epsilon.
double dist_t(double t, double t_other, double epsilon);

/// Symmetric distance between activity tuples, bound to tuple component indices.
class ActivityDistance {
public:
    enum class Kind { InterventionOccupation, DiagnosisIntervention, Table };

    static ActivityDistance intervention_occupation(std::size_t intervention, std::size_t occupation);
    static ActivityDistance diagnosis_intervention(std::size_t diagnosis, std::size_t intervention);
    /// Lookup over one component; unordered pairs, identical values cost 0,
    /// unlisted pairs cost `fallback`.
    static ActivityDistance table(std::size_t component, std::map<std::pair<std::string, std::string>, double> costs,
                                  double fallback = 1.0);

    /// Resolves component indices by name against a pathway's aspect list.
    static ActivityDistance from_json(const nlohmann::json& j, const std::vector<std::string>& activity_aspects);
    nlohmann::json to_json() const;

    double operator()(const ActivityTuple& a, const ActivityTuple& b) const;
    Kind kind() const { return kind_; }
    /// Largest value the distance can take.
    double max_value() const;

private:
    Kind kind_ = Kind::InterventionOccupation;
    std::size_t first_ = 0;
    std::size_t second_ = 1;
    std::map<std::pair<std::string, std::string>, double> table_;
    double fallback_ = 1.0;
};

struct DissimParams {
    double delta = 0.5;
    double epsilon = 20.0;
    double omega_a = 0.5;
    double penalty = 1.0;
    ActivityDistance activity = ActivityDistance::intervention_occupation(0, 1);

    /// Throws unless 0 <= omega_a <= 1, epsilon > 0 and
    /// penalty >= omega_a * delta + (1 - omega_a).
    void validate() const;

    static DissimParams from_json(const nlohmann::json& j, const std::vector<std::string>& activity_aspects);
    nlohmann::json to_json() const;
};

double dissimilarity(const Pathway& a, const Pathway& b, const DissimParams& params);

/// Literal recursion; refuses inputs with |A| * |A'| above max_cells.
double dissimilarity_bruteforce(const Pathway& a, const Pathway& b, const DissimParams& params,
                                std::size_t max_cells = 144);

/// dissimilarity / (|A| + |A'|); 0 when both are empty.
double normalized_dissimilarity(const Pathway& a, const Pathway& b, const DissimParams& params);

/// Symmetric n x n matrix of normalized dissimilarities, row-major.
struct DissimilarityMatrix {
    std::vector<std::string> ids;
    std::vector<double> values;

    std::size_t size() const { return ids.size(); }
    double operator()(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }

    DissimilarityMatrix submatrix(const std::vector<std::size_t>& rows) const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Rows are distributed over `workers` threads; every cell is computed by the
/// same deterministic code path, so the result does not depend on the count.
DissimilarityMatrix pairwise_matrix(const std::vector<std::pair<std::string, Pathway>>& pathways,
                                    const DissimParams& params, unsigned workers = 1, const ProgressFn& progress = {});

/// 64-bit FNV-1a over the raw matrix bytes.
std::uint64_t matrix_checksum(const DissimilarityMatrix& m);

/// Binary little-endian float64 payload at `path` plus a JSON sidecar at
/// `path + ".json"` holding ids, params and checksum.
void save_matrix(const DissimilarityMatrix& m, const std::string& path, const nlohmann::json& params = {});
DissimilarityMatrix load_matrix(const std::string& path, nlohmann::json* params = nullptr);
void write_matrix_csv(const DissimilarityMatrix& m, std::ostream& out);

}  // namespace magpath
