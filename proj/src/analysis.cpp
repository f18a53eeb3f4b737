#include "hypee/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hypee/rng.hpp"

namespace hypee::analysis {

void EmbeddingSet::validate() const {
    if (has_labels() && labels.size() != points.size()) {
        throw std::invalid_argument("embedding set: labels length mismatch");
    }
    if (has_exit_ids() && exit_ids.size() != points.size()) {
        throw std::invalid_argument("embedding set: exit_ids length mismatch");
    }
    if (!points.empty()) {
        const size_t n = points.front().size();
        for (const auto& p : points) {
            if (p.size() != n) {
                throw std::invalid_argument("embedding set: inconsistent point dimensions");
            }
        }
    }
}

namespace {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

HyperbolicityReport delta_from_distance_matrix(const std::vector<std::vector<double>>& dist) {
    const size_t n = dist.size();
    if (n < 4) throw std::invalid_argument("delta: need at least 4 points");

    double diameter = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (dist[i].size() != n) throw std::invalid_argument("delta: matrix is not square");
        for (size_t j = 0; j < n; ++j) diameter = std::max(diameter, dist[i][j]);
    }
    if (!(diameter > 0.0)) throw std::invalid_argument("delta: zero diameter");

    // Gromov products based at point 0.
    std::vector<std::vector<double>> gp(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            gp[i][j] = 0.5 * (dist[i][0] + dist[j][0] - dist[i][j]);
        }
    }

    // delta = max_{x,y} ( max_z min(gp[x][z], gp[z][y]) - gp[x][y] )
    double delta = 0.0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            for (size_t k = 0; k < n; ++k) {
                best = std::max(best, std::min(gp[i][k], gp[k][j]));
            }
            delta = std::max(delta, best - gp[i][j]);
        }
    }

    HyperbolicityReport report;
    report.delta = delta;
    report.diameter = diameter;
    report.delta_rel = std::min(1.0, 2.0 * delta / diameter);
    if (report.delta_rel > 0.0) report.c_estimate = curvature_estimate(report.delta_rel);
    return report;
}

HyperbolicityReport delta_hyperbolicity(const std::vector<std::vector<double>>& points,
                                        MetricKind metric, double c) {
    const size_t n = points.size();
    if (n < 4) throw std::invalid_argument("delta: need at least 4 points");

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    if (metric == MetricKind::euclidean) {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                dist[i][j] = dist[j][i] = euclidean_distance(points[i], points[j]);
            }
        }
    } else {
        const geometry::Curvature curv(c);
        std::vector<geometry::LorentzPoint> lifted;
        lifted.reserve(n);
        for (const auto& p : points) lifted.push_back(geometry::lift(p, curv));
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                dist[i][j] = dist[j][i] = geometry::geodesic_distance(lifted[i], lifted[j], curv);
            }
        }
    }
    return delta_from_distance_matrix(dist);
}

double curvature_estimate(double delta_rel) {
    if (!(delta_rel > 0.0)) {
        throw std::invalid_argument(
            "curvature_estimate: delta_rel must be positive (a zero value means infinite "
            "curvature)");
    }
    const double ratio = 0.144 / delta_rel;
    return ratio * ratio;
}

KmeansResult hyperbolic_kmeans(const std::vector<std::vector<double>>& points_space, int k,
                               int max_iters, uint64_t seed, geometry::Curvature c) {
    const size_t n = points_space.size();
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (static_cast<size_t>(k) > n) throw std::invalid_argument("kmeans: k exceeds point count");
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

    std::vector<geometry::LorentzPoint> pts;
    pts.reserve(n);
    for (const auto& p : points_space) pts.push_back(geometry::lift(p, c));
    const size_t dim = points_space.front().size();
    const size_t ambient_dim = dim + 1;

    // squared Lorentzian distance: -2/c - 2<x,y>_L; same ordering as geodesic
    // distance, and the Lorentzian centroid is its exact Frechet minimizer.
    auto lorentz_sq = [&](const geometry::LorentzPoint& a, const geometry::LorentzPoint& b) {
        return -2.0 / c.c - 2.0 * geometry::lorentz_inner_core(a.ambient(), b.ambient());
    };

    // distinct seed points
    rng::Engine eng(seed);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    eng.shuffle(order);
    std::vector<geometry::LorentzPoint> centroids;
    centroids.reserve(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) centroids.push_back(pts[order[static_cast<size_t>(j)]]);

    std::vector<int> assignment(n, -1);
    KmeansResult result;

    auto centroid_of = [&](const std::vector<size_t>& members) {
        std::vector<double> s(ambient_dim, 0.0);
        for (size_t idx : members) {
            const auto amb = pts[idx].ambient();
            for (size_t d = 0; d < ambient_dim; ++d) s[d] += amb[d];
        }
        for (double& x : s) x /= static_cast<double>(members.size());
        const double ss = geometry::lorentz_inner_core(std::span<const double>(s),
                                                       std::span<const double>(s));
        const double denom = std::sqrt(c.c) * std::sqrt(std::abs(ss));
        for (double& x : s) x /= denom;
        return geometry::LorentzPoint::from_ambient_unchecked(std::move(s));
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = lorentz_sq(pts[i], centroids[0]);
            for (int j = 1; j < k; ++j) {
                const double d = lorentz_sq(pts[i], centroids[static_cast<size_t>(j)]);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            objective += best_d;
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::vector<std::vector<size_t>> members(static_cast<size_t>(k));
        for (size_t i = 0; i < n; ++i) members[static_cast<size_t>(assignment[i])].push_back(i);
        for (int j = 0; j < k; ++j) {
            if (!members[static_cast<size_t>(j)].empty()) {
                centroids[static_cast<size_t>(j)] = centroid_of(members[static_cast<size_t>(j)]);
                continue;
            }
            // re-seed an empty cluster from the point farthest from its centroid
            size_t farthest = 0;
            double far_d = -1.0;
            for (size_t i = 0; i < n; ++i) {
                const double d =
                    lorentz_sq(pts[i], centroids[static_cast<size_t>(assignment[i])]);
                if (d > far_d) {
                    far_d = d;
                    farthest = i;
                }
            }
            centroids[static_cast<size_t>(j)] = pts[farthest];
            assignment[farthest] = j;
        }
    }

    result.assignment = std::move(assignment);
    result.centroid_space.reserve(static_cast<size_t>(k));
    double geo_obj = 0.0;
    for (int j = 0; j < k; ++j) {
        const auto space = centroids[static_cast<size_t>(j)].space();
        result.centroid_space.emplace_back(space.begin(), space.end());
    }
    for (size_t i = 0; i < n; ++i) {
        const double d = geometry::geodesic_distance(
            pts[i], centroids[static_cast<size_t>(result.assignment[i])], c);
        geo_obj += d * d;
    }
    result.geodesic_objective = geo_obj;
    return result;
}

LookaheadResult lookahead(const geometry::LorentzPoint& query, int query_exit,
                          std::optional<int> query_label, const EmbeddingSet& references,
                          double T, const entailment::ConeConfig& cone) {
    references.validate();
    if (!references.has_exit_ids()) {
        throw std::invalid_argument("lookahead: reference set needs exit ids");
    }
    LookaheadResult result;
    std::vector<long> label_votes;
    for (size_t i = 0; i < references.size(); ++i) {
        if (references.exit_ids[i] <= query_exit) continue;
        const auto ref = geometry::lift(references.points[i], cone.c);
        if (!entailment::cone_membership(query, ref, T, cone)) continue;
        result.retrieved.push_back(i);
        if (references.has_labels()) {
            const int label = references.labels[i];
            if (label >= static_cast<int>(label_votes.size())) {
                label_votes.resize(static_cast<size_t>(label) + 1, 0);
            }
            ++label_votes[static_cast<size_t>(label)];
            if (query_label && label == *query_label) ++result.matched;
        }
    }
    if (!label_votes.empty() && !result.retrieved.empty()) {
        result.majority_label = static_cast<int>(
            std::max_element(label_votes.begin(), label_votes.end()) - label_votes.begin());
    }
    if (query_label && !result.retrieved.empty() && references.has_labels()) {
        result.precision = static_cast<double>(result.matched) /
                           static_cast<double>(result.retrieved.size());
    }
    return result;
}

std::vector<LookaheadSweepRow> lookahead_sweep(const EmbeddingSet& queries, int query_exit,
                                               const EmbeddingSet& references,
                                               std::span<const double> thresholds,
                                               const entailment::ConeConfig& cone) {
    queries.validate();
    if (!queries.has_labels()) {
        throw std::invalid_argument("lookahead_sweep: query set needs labels");
    }
    std::vector<LookaheadSweepRow> rows;
    rows.reserve(thresholds.size());
    for (double T : thresholds) {
        LookaheadSweepRow row;
        row.threshold = T;
        long covered = 0;
        for (size_t q = 0; q < queries.size(); ++q) {
            const auto point = geometry::lift(queries.points[q], cone.c);
            const auto res = lookahead(point, query_exit, queries.labels[q], references, T, cone);
            ++row.queries;
            if (res.retrieved.empty()) continue;
            ++covered;
            row.retrieved += static_cast<long>(res.retrieved.size());
            row.matched += res.matched;
        }
        row.coverage = row.queries ? static_cast<double>(covered) /
                                         static_cast<double>(row.queries)
                                   : 0.0;
        row.precision = row.retrieved ? static_cast<double>(row.matched) /
                                            static_cast<double>(row.retrieved)
                                      : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<TraversalStep> traverse(const std::vector<double>& start_space, int steps,
                                    const EmbeddingSet& references, TraversalMode mode,
                                    geometry::Curvature c) {
    if (steps < 2) throw std::invalid_argument("traverse: steps must be >= 2");
    references.validate();
    if (references.size() == 0) throw std::invalid_argument("traverse: empty reference set");

    const size_t dim = start_space.size();
    std::vector<TraversalStep> path;
    path.reserve(static_cast<size_t>(steps));

    if (mode == TraversalMode::hyperbolic) {
        std::vector<geometry::LorentzPoint> refs;
        refs.reserve(references.size());
        for (const auto& p : references.points) refs.push_back(geometry::lift(p, c));

        const auto start = geometry::lift(start_space, c);
        const auto v = geometry::log_map_origin(start, c);
        for (int s = 0; s < steps; ++s) {
            // t runs 0 -> 1; tangent image shrinks linearly toward the origin (the root)
            const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
            geometry::TangentVector vt;
            vt.space.resize(dim);
            for (size_t d = 0; d < dim; ++d) vt.space[d] = (1.0 - t) * v.space[d];
            const auto point = s == 0 ? start : geometry::exp_map_origin(vt, c);

            TraversalStep step;
            const auto space = point.space();
            step.point.assign(space.begin(), space.end());
            double best = -std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < refs.size(); ++i) {
                // raw Lorentzian inner product; maximal (= -1/c) iff identical
                const double sim =
                    geometry::lorentz_inner_core(point.ambient(), refs[i].ambient());
                if (sim > best) {
                    best = sim;
                    step.nearest_index = i;
                }
            }
            step.similarity = best;
            if (references.has_exit_ids()) step.nearest_exit = references.exit_ids[step.nearest_index];
            if (references.has_labels()) step.nearest_label = references.labels[step.nearest_index];
            path.push_back(std::move(step));
        }
        return path;
    }

    // Euclidean baseline: root = L2-normalized centroid of the references;
    // normalized LERP between the unit start and the root.
    std::vector<double> root(dim, 0.0);
    for (const auto& p : references.points) {
        for (size_t d = 0; d < dim; ++d) root[d] += p[d];
    }
    auto normalize = [](std::vector<double>& x) {
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw NumericError("traverse: degenerate root (zero centroid)");
        for (double& v : x) v /= norm;
    };
    normalize(root);
    std::vector<double> start_unit = start_space;
    normalize(start_unit);

    std::vector<std::vector<double>> refs_unit = references.points;
    for (auto& r : refs_unit) normalize(r);

    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        std::vector<double> p(dim);
        for (size_t d = 0; d < dim; ++d) p[d] = (1.0 - t) * start_unit[d] + t * root[d];
        if (s == 0) {
            p = start_unit;
        } else if (s == steps - 1) {
            p = root;
        } else {
            normalize(p);
        }

        TraversalStep step;
        step.point = p;
        double best = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < refs_unit.size(); ++i) {
            double cosine = 0.0;
            for (size_t d = 0; d < dim; ++d) cosine += p[d] * refs_unit[i][d];
            if (cosine > best) {
                best = cosine;
                step.nearest_index = i;
            }
        }
        step.similarity = best;
        if (references.has_exit_ids()) step.nearest_exit = references.exit_ids[step.nearest_index];
        if (references.has_labels()) step.nearest_label = references.labels[step.nearest_index];
        path.push_back(std::move(step));
    }
    return path;
}

HistogramTable norm_histogram(const EmbeddingSet& set, int bins) {
    if (bins < 1) throw std::invalid_argument("norm_histogram: bins must be >= 1");
    set.validate();
    if (set.size() == 0) throw std::invalid_argument("norm_histogram: empty set");

    std::vector<double> norms(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        double acc = 0.0;
        for (double x : set.points[i]) acc += x * x;
        norms[i] = std::sqrt(acc);
    }

    HistogramTable table;
    std::vector<int> ids = set.has_exit_ids() ? set.exit_ids : std::vector<int>(set.size(), 0);
    table.exit_ids = ids;
    std::sort(table.exit_ids.begin(), table.exit_ids.end());
    table.exit_ids.erase(std::unique(table.exit_ids.begin(), table.exit_ids.end()),
                         table.exit_ids.end());

    double lo = *std::min_element(norms.begin(), norms.end());
    double hi = *std::max_element(norms.begin(), norms.end());
    if (hi - lo < 1e-12) hi = lo + 1.0;  // single-value degenerate range
    table.edges.resize(static_cast<size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) {
        table.edges[static_cast<size_t>(b)] =
            lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    }

    table.counts.assign(table.exit_ids.size(), std::vector<long>(static_cast<size_t>(bins), 0));
    table.mean_norm.assign(table.exit_ids.size(), 0.0);
    std::vector<long> totals(table.exit_ids.size(), 0);
    for (size_t i = 0; i < set.size(); ++i) {
        const auto it = std::lower_bound(table.exit_ids.begin(), table.exit_ids.end(), ids[i]);
        const size_t e = static_cast<size_t>(it - table.exit_ids.begin());
        int b = static_cast<int>((norms[i] - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);  // right edge lands in the last bin
        ++table.counts[e][static_cast<size_t>(b)];
        table.mean_norm[e] += norms[i];
        ++totals[e];
    }
    for (size_t e = 0; e < table.exit_ids.size(); ++e) {
        if (totals[e] > 0) table.mean_norm[e] /= static_cast<double>(totals[e]);
    }
    return table;
}

} // namespace hypee::analysis
