#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypee/entailment.hpp"
#include "hypee/geometry.hpp"

namespace hypee::analysis {

// Parallel arrays of embeddings, labels and producing exit. Points are stored
// as space coordinates; the time component is derived on demand.
struct EmbeddingSet {
    std::vector<std::vector<double>> points;
    std::vector<int> labels;    // empty when absent
    std::vector<int> exit_ids;  // empty when absent
    double curvature = 1.0;
    bool hyperbolic = true;

    size_t size() const { return points.size(); }
    bool has_labels() const { return !labels.empty(); }
    bool has_exit_ids() const { return !exit_ids.empty(); }
    void validate() const;
};

enum class MetricKind { euclidean, lorentz_geodesic };

struct HyperbolicityReport {
    double delta = 0.0;
    double diameter = 0.0;
    double delta_rel = 0.0;                // 2*delta / diameter
    std::optional<double> c_estimate;      // absent when delta_rel == 0
};

// Gromov delta with base point = point 0, via the max-min product of the
// Gromov product matrix (cubic). delta is base-point dependent up to a factor
// of 2; the choice of base is part of the contract.
HyperbolicityReport delta_hyperbolicity(const std::vector<std::vector<double>>& points,
                                        MetricKind metric, double c = 1.0);

HyperbolicityReport delta_from_distance_matrix(const std::vector<std::vector<double>>& dist);

// c = (0.144 / delta_rel)^2
double curvature_estimate(double delta_rel);

struct KmeansResult {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centroid_space;  // on-manifold, space coords
    std::vector<double> objective_history;  // squared Lorentzian distance objective
    double geodesic_objective = 0.0;        // final sum of squared geodesic distances
    int iterations = 0;
};

// Lloyd iterations with geodesic-distance assignment and the Lorentzian
// centroid update mu = s / (sqrt(c) * sqrt(|<s,s>_L|)). Empty clusters are
// re-seeded from the point farthest from its centroid.
KmeansResult hyperbolic_kmeans(const std::vector<std::vector<double>>& points_space, int k,
                               int max_iters, uint64_t seed, geometry::Curvature c);

struct LookaheadResult {
    std::vector<size_t> retrieved;  // indices into the reference set
    std::optional<int> majority_label;
    long matched = 0;                 // retrieved references sharing the query label
    std::optional<double> precision;  // matched / retrieved, when labels are known
};

// Retrieves reference embeddings from exits deeper than `query_exit` that lie
// within the query's relaxed entailment cone, ext <= T * aper.
LookaheadResult lookahead(const geometry::LorentzPoint& query, int query_exit,
                          std::optional<int> query_label, const EmbeddingSet& references,
                          double T, const entailment::ConeConfig& cone);

struct LookaheadSweepRow {
    double threshold = 0.0;
    long retrieved = 0;
    long matched = 0;
    double precision = 0.0;       // matched / retrieved, over covered queries
    double coverage = 0.0;        // fraction of queries retrieving >= 1 reference
    long queries = 0;
};

// Aggregate retrieval statistics over a query set for several thresholds.
std::vector<LookaheadSweepRow> lookahead_sweep(const EmbeddingSet& queries, int query_exit,
                                               const EmbeddingSet& references,
                                               std::span<const double> thresholds,
                                               const entailment::ConeConfig& cone);

enum class TraversalMode { hyperbolic, euclidean };

struct TraversalStep {
    std::vector<double> point;  // space coords (hyperbolic) or unit vector (euclidean)
    size_t nearest_index = 0;
    int nearest_exit = -1;
    int nearest_label = -1;
    double similarity = 0.0;
};

inline constexpr int kDefaultTraversalSteps = 50;

// Interpolates from `start` to the root. Hyperbolic: linear interpolation of
// log-map images, mapped back through the exponential map; the root is the
// origin. Euclidean: normalized LERP toward the L2-normalized centroid of the
// references. Nearest neighbours by Lorentzian inner product or cosine.
std::vector<TraversalStep> traverse(const std::vector<double>& start_space, int steps,
                                    const EmbeddingSet& references, TraversalMode mode,
                                    geometry::Curvature c);

struct HistogramTable {
    std::vector<double> edges;           // bins+1 shared edges
    std::vector<int> exit_ids;           // distinct exits, ascending
    std::vector<std::vector<long>> counts;  // counts[exit][bin]
    std::vector<double> mean_norm;       // per exit
};

HistogramTable norm_histogram(const EmbeddingSet& set, int bins);

} // namespace hypee::analysis
