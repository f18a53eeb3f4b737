#include <doctest.h>

#include <cmath>

#include "hypee/analysis.hpp"
#include "hypee/data_io.hpp"
#include "hypee/rng.hpp"
#include "hypee/trainer.hpp"

using namespace hypee;
using namespace hypee::analysis;

namespace {

// Four-point-condition brute force over all quadruples containing the base
// point (point 0), via the opposite-pair sums. Independent of the Gromov
// product / max-min product route the implementation takes.
double four_point_delta_base0(const std::vector<std::vector<double>>& D) {
    const size_t n = D.size();
    double delta = 0.0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            for (size_t k = 0; k < n; ++k) {
                const double sa = D[i][j] + D[k][0];
                const double sb = D[i][k] + D[j][0];
                const double sc = D[i][0] + D[j][k];
                delta = std::max(delta, 0.5 * (sa - std::max(sb, sc)));
            }
        }
    }
    return delta;
}

// Same quantity through the Gromov products themselves; identical floating
// point operations to the implementation, so equality is exact.
double gromov_delta_base0(const std::vector<std::vector<double>>& D) {
    const size_t n = D.size();
    std::vector<std::vector<double>> gp(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) gp[i][j] = 0.5 * (D[i][0] + D[j][0] - D[i][j]);
    }
    double delta = 0.0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double best = -1e300;
            for (size_t k = 0; k < n; ++k) best = std::max(best, std::min(gp[i][k], gp[k][j]));
            delta = std::max(delta, best - gp[i][j]);
        }
    }
    return delta;
}

std::vector<std::vector<double>> euclidean_matrix(const std::vector<std::vector<double>>& pts) {
    const size_t n = pts.size();
    std::vector<std::vector<double>> D(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (size_t d = 0; d < pts[i].size(); ++d) {
                const double diff = pts[i][d] - pts[j][d];
                acc += diff * diff;
            }
            D[i][j] = D[j][i] = std::sqrt(acc);
        }
    }
    return D;
}

} // namespace

TEST_CASE("star-tree metrics are 0-hyperbolic") {
    // center (index 0) plus three leaves: d(0,i) = r_i, d(i,j) = r_i + r_j
    const std::vector<double> r{0.0, 1.0, 2.0, 3.5};
    std::vector<std::vector<double>> D(4, std::vector<double>(4, 0.0));
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = 0; j < 4; ++j) {
            if (i != j) D[i][j] = r[i] + r[j];
        }
    }
    const auto report = delta_from_distance_matrix(D);
    CHECK(report.delta == 0.0);
    CHECK(report.delta_rel == 0.0);
    CHECK_FALSE(report.c_estimate.has_value());

    // collinear Euclidean points form a path tree: also exactly 0
    const auto collinear =
        delta_hyperbolicity({{0.0}, {1.0}, {-2.0}, {3.0}}, MetricKind::euclidean);
    CHECK(collinear.delta == 0.0);
    CHECK(collinear.delta_rel == 0.0);
}

TEST_CASE("cubic implementation equals the four-point brute force") {
    rng::Engine eng(41);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 50; ++i) pts.push_back(eng.normal_vector(4));
        const auto D = euclidean_matrix(pts);
        const auto report = delta_from_distance_matrix(D);
        CHECK(report.delta == gromov_delta_base0(D));  // bit-identical route
        // the opposite-pair-sum formulation rounds differently; agreement is
        // exact up to floating-point associativity
        CHECK(std::abs(report.delta - four_point_delta_base0(D)) <= 1e-12);
        CHECK(report.delta_rel >= 0.0);
        CHECK(report.delta_rel <= 1.0);
    }
}

TEST_CASE("delta over the lorentz geodesic metric") {
    rng::Engine eng(43);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(eng.normal_vector(3));
    const auto report = delta_hyperbolicity(pts, MetricKind::lorentz_geodesic, 1.0);
    CHECK(report.delta_rel >= 0.0);
    CHECK(report.delta_rel <= 1.0);
    CHECK(report.diameter > 0.0);

    CHECK_THROWS_AS((void)delta_hyperbolicity({{0.0}, {0.0}, {0.0}, {0.0}},
                                              MetricKind::euclidean),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)delta_hyperbolicity({{1.0}, {2.0}, {3.0}}, MetricKind::euclidean),
                    std::invalid_argument);
}

TEST_CASE("curvature estimate reproduces the reference pairs") {
    const std::vector<std::pair<double, double>> rows{
        {0.282, 0.26}, {0.304, 0.223}, {0.233, 0.379},
        {0.247, 0.338}, {0.148, 0.94}, {0.143, 1.012},
    };
    for (const auto& [delta_rel, expected] : rows) {
        CHECK(std::abs(curvature_estimate(delta_rel) - expected) / expected < 0.01);
    }
    CHECK(curvature_estimate(0.144) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)curvature_estimate(0.0), std::invalid_argument);
}

TEST_CASE("hyperbolic k-means") {
    const geometry::Curvature c1;
    rng::Engine eng(47);

    SUBCASE("k = number of points: every point is its own cluster, objective 0") {
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 6; ++i) pts.push_back(eng.normal_vector(3));
        const auto res = hyperbolic_kmeans(pts, 6, 20, 1, c1);
        CHECK(res.objective_history.back() <= 1e-12);
        std::vector<bool> used(6, false);
        for (int a : res.assignment) used[static_cast<size_t>(a)] = true;
        for (bool u : used) CHECK(u);
    }

    SUBCASE("well-separated planted clusters are recovered under any seed") {
        // two tangent-space blobs far apart: intra spread << inter distance
        std::vector<std::vector<double>> pts;
        std::vector<int> truth;
        for (int i = 0; i < 20; ++i) {
            std::vector<double> p{4.0 + 0.05 * eng.normal(), 0.05 * eng.normal()};
            pts.push_back(p);
            truth.push_back(0);
        }
        for (int i = 0; i < 20; ++i) {
            std::vector<double> p{-4.0 + 0.05 * eng.normal(), 0.05 * eng.normal()};
            pts.push_back(p);
            truth.push_back(1);
        }
        for (uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
            const auto res = hyperbolic_kmeans(pts, 2, 50, seed, c1);
            // perfect recovery up to label swap
            for (size_t i = 1; i < pts.size(); ++i) {
                CHECK((res.assignment[i] == res.assignment[0]) == (truth[i] == truth[0]));
            }
        }
    }

    SUBCASE("objective is monotone non-increasing; centroids stay on-manifold") {
        for (uint64_t seed = 1; seed <= 10; ++seed) {
            std::vector<std::vector<double>> pts;
            for (int i = 0; i < 40; ++i) pts.push_back(eng.normal_vector(4));
            const auto res = hyperbolic_kmeans(pts, 5, 30, seed, c1);
            for (size_t t = 1; t < res.objective_history.size(); ++t) {
                CHECK(res.objective_history[t] <= res.objective_history[t - 1] + 1e-9);
            }
            for (const auto& space : res.centroid_space) {
                const auto p = geometry::lift(space, c1);
                // lift re-derives time; verify the stored centroid really was on-manifold
                CHECK(geometry::manifold_residual(p, c1) <= 1e-6);
            }
        }
    }

    SUBCASE("argument validation") {
        std::vector<std::vector<double>> pts{{1.0}, {2.0}};
        CHECK_THROWS_AS((void)hyperbolic_kmeans(pts, 3, 10, 1, c1), std::invalid_argument);
        CHECK_THROWS_AS((void)hyperbolic_kmeans(pts, 0, 10, 1, c1), std::invalid_argument);
    }
}

namespace {

EmbeddingSet ray_references(const std::vector<double>& dir, std::span<const double> scales,
                            int exit_id, int label) {
    EmbeddingSet refs;
    refs.hyperbolic = true;
    refs.curvature = 1.0;
    for (double s : scales) {
        std::vector<double> p(dir.size());
        // spatial part of exp(s * dir/|dir|): sinh(s) * unit
        double norm = 0.0;
        for (double x : dir) norm += x * x;
        norm = std::sqrt(norm);
        for (size_t d = 0; d < dir.size(); ++d) p[d] = std::sinh(s) * dir[d] / norm;
        refs.points.push_back(std::move(p));
        refs.exit_ids.push_back(exit_id);
        refs.labels.push_back(label);
    }
    return refs;
}

} // namespace

TEST_CASE("lookahead retrieval") {
    const entailment::ConeConfig cone(0.1, geometry::Curvature(1.0));

    SUBCASE("outward-ray references are always retrieved") {
        const std::vector<double> dir{0.5, -0.3, 0.8};
        const auto refs = ray_references(dir, std::vector<double>{1.5, 2.0, 2.5}, 1, 4);
        const auto query = geometry::exp_map_origin(
            geometry::TangentVector{{0.5 * 0.5, -0.3 * 0.5, 0.8 * 0.5}}, cone.c);
        const auto res = lookahead(query, 0, 4, refs, 1.0, cone);
        CHECK(res.retrieved.size() == 3);
        CHECK(res.majority_label == 4);
        CHECK(res.precision == doctest::Approx(1.0));
    }

    SUBCASE("references at or below the query exit are excluded") {
        const std::vector<double> dir{1.0, 0.0};
        auto refs = ray_references(dir, std::vector<double>{1.5, 2.0}, 1, 0);
        refs.exit_ids[0] = 0;  // same level as the query: must be skipped
        const auto query = geometry::exp_map_origin(geometry::TangentVector{{0.5, 0.0}}, cone.c);
        const auto res = lookahead(query, 0, 0, refs, 1.5, cone);
        CHECK(res.retrieved.size() == 1);
        CHECK(res.retrieved[0] == 1);
    }

    SUBCASE("retrieval sets are nested in T") {
        rng::Engine eng(53);
        EmbeddingSet refs;
        refs.hyperbolic = true;
        for (int i = 0; i < 150; ++i) {
            auto p = eng.normal_vector(3);
            refs.points.push_back(p);
            refs.exit_ids.push_back(1 + static_cast<int>(eng.below(2)));
            refs.labels.push_back(static_cast<int>(eng.below(4)));
        }
        const auto query = geometry::exp_map_origin(
            geometry::TangentVector{{0.9, 0.1, -0.2}}, cone.c);
        const auto r12 = lookahead(query, 0, std::nullopt, refs, 1.2, cone);
        const auto r15 = lookahead(query, 0, std::nullopt, refs, 1.5, cone);
        const auto r20 = lookahead(query, 0, std::nullopt, refs, 2.0, cone);
        for (size_t idx : r12.retrieved) {
            CHECK(std::find(r15.retrieved.begin(), r15.retrieved.end(), idx) !=
                  r15.retrieved.end());
        }
        for (size_t idx : r15.retrieved) {
            CHECK(std::find(r20.retrieved.begin(), r20.retrieved.end(), idx) !=
                  r20.retrieved.end());
        }
    }
}

TEST_CASE("traversal") {
    const geometry::Curvature c1;
    rng::Engine eng(59);
    EmbeddingSet refs;
    refs.hyperbolic = true;
    for (int i = 0; i < 30; ++i) {
        refs.points.push_back(eng.normal_vector(3));
        refs.exit_ids.push_back(static_cast<int>(eng.below(3)));
        refs.labels.push_back(static_cast<int>(eng.below(5)));
    }
    const std::vector<double> start{1.2, -0.4, 0.6};

    SUBCASE("steps = 2 is exactly {start, root}") {
        const auto path = traverse(start, 2, refs, TraversalMode::hyperbolic, c1);
        REQUIRE(path.size() == 2);
        for (size_t d = 0; d < 3; ++d) {
            CHECK(path[0].point[d] == doctest::Approx(start[d]).epsilon(1e-9));
            CHECK(path[1].point[d] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        }
    }

    SUBCASE("endpoints are exact and norms shrink monotonically toward the root") {
        const auto path = traverse(start, 50, refs, TraversalMode::hyperbolic, c1);
        REQUIRE(path.size() == 50);
        for (size_t d = 0; d < 3; ++d) {
            CHECK(path.front().point[d] == doctest::Approx(start[d]).epsilon(1e-9));
            CHECK(std::abs(path.back().point[d]) <= 1e-9);
        }
        double prev = 1e300;
        for (const auto& step : path) {
            double norm = 0.0;
            for (double x : step.point) norm += x * x;
            norm = std::sqrt(norm);
            CHECK(norm <= prev + 1e-12);
            prev = norm;
        }
    }

    SUBCASE("tangent interpolation is affine: the middle step is the tangent midpoint") {
        const auto path = traverse(start, 11, refs, TraversalMode::hyperbolic, c1);
        const auto v = geometry::log_map_origin(geometry::lift(start, c1), c1);
        const auto mid = geometry::log_map_origin(geometry::lift(path[5].point, c1), c1);
        for (size_t d = 0; d < 3; ++d) {
            CHECK(mid.space[d] == doctest::Approx(0.5 * v.space[d]).epsilon(1e-7));
        }
    }

    SUBCASE("nearest neighbour by inner product equals nearest by geodesic distance") {
        const auto path = traverse(start, 7, refs, TraversalMode::hyperbolic, c1);
        for (const auto& step : path) {
            const auto p = geometry::lift(step.point, c1);
            size_t best = 0;
            double best_d = 1e300;
            for (size_t i = 0; i < refs.size(); ++i) {
                const double d =
                    geometry::geodesic_distance(p, geometry::lift(refs.points[i], c1), c1);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            CHECK(step.nearest_index == best);
        }
    }

    SUBCASE("euclidean variant: unit path, exact endpoints") {
        EmbeddingSet eucl = refs;
        eucl.hyperbolic = false;
        const auto path = traverse(start, 9, eucl, TraversalMode::euclidean, c1);
        REQUIRE(path.size() == 9);
        // endpoints: normalized start and normalized centroid
        double norm = 0.0;
        for (double x : start) norm += x * x;
        norm = std::sqrt(norm);
        for (size_t d = 0; d < 3; ++d) {
            CHECK(path.front().point[d] == doctest::Approx(start[d] / norm));
        }
        for (const auto& step : path) {
            double n = 0.0;
            for (double x : step.point) n += x * x;
            CHECK(std::sqrt(n) == doctest::Approx(1.0));
        }
    }

    SUBCASE("default step count is 50") {
        CHECK(kDefaultTraversalSteps == 50);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS((void)traverse(start, 1, refs, TraversalMode::hyperbolic, c1),
                        std::invalid_argument);
        EmbeddingSet empty;
        CHECK_THROWS_AS((void)traverse(start, 5, empty, TraversalMode::hyperbolic, c1),
                        std::invalid_argument);
    }
}

TEST_CASE("inter-layer embeddings are more tree-like than intra-layer") {
    // embeddings drawn across two exit levels should look more tree-like
    // than embeddings from any single level
    data_io::SyntheticSpec spec;
    spec.num_superclasses = 4;
    spec.subclasses_per_superclass = 3;
    spec.samples_per_class = 60;
    spec.input_dim = 16;
    spec.class_spread = 0.7;
    spec.superclass_separation = 6.0;
    spec.seed = 11;

    model::BackboneConfig cfg;
    cfg.input_dim = 16;
    cfg.hidden_dims = {10, 32, 32};
    cfg.exit_after = {0, 1, 2};
    cfg.latent_dim = 8;
    cfg.num_classes = 12;
    cfg.mode = model::LatentMode::hyperbolic;

    auto m = model::initialize_model(cfg, geometry::Curvature(1.0), 11);
    const auto splits = split_dataset(data_io::generate_synthetic(spec), 0.7, 0.0, 11);
    trainer::LossConfig loss;
    loss.exit_weights = {0.9, 1.0, 1.1};
    loss.lambda = 0.35;
    trainer::OptimizerConfig opt;
    opt.kind = trainer::OptimizerKind::adam;
    opt.learning_rate = 0.01;
    opt.epochs = 30;
    opt.batch_size = 32;
    opt.weight_decay = 0.75;
    const entailment::ConeConfig cone(0.1, geometry::Curvature(1.0));
    (void)trainer::train(m, splits.train, loss, cone, opt, 11);

    // 40-point subsample per exit level
    std::vector<std::vector<std::vector<double>>> sets(3);
    for (size_t i = 0; i < 40; ++i) {
        const auto exits = model::forward_with_exits(m, splits.eval.features[i]);
        for (int e = 0; e < 3; ++e) {
            sets[static_cast<size_t>(e)].emplace_back(
                exits[static_cast<size_t>(e)].embedding.begin() + 1,
                exits[static_cast<size_t>(e)].embedding.end());
        }
    }
    auto rel = [](const std::vector<std::vector<double>>& pts) {
        return delta_hyperbolicity(pts, MetricKind::lorentz_geodesic, 1.0).delta_rel;
    };
    const double intra_mean = (rel(sets[0]) + rel(sets[1]) + rel(sets[2])) / 3.0;
    auto inter = sets[0];
    inter.insert(inter.end(), sets[2].begin(), sets[2].end());
    CHECK(rel(inter) < intra_mean);  // union across layers: lower delta_rel
}

TEST_CASE("norm histogram") {
    SUBCASE("single point lands in one bin") {
        EmbeddingSet set;
        set.points = {{3.0, 4.0}};
        set.exit_ids = {0};
        const auto table = norm_histogram(set, 10);
        long total = 0;
        long nonzero = 0;
        for (long c : table.counts[0]) {
            total += c;
            if (c > 0) ++nonzero;
        }
        CHECK(total == 1);
        CHECK(nonzero == 1);
        CHECK(table.mean_norm[0] == doctest::Approx(5.0));
    }

    SUBCASE("counts per exit sum to the per-exit population") {
        rng::Engine eng(61);
        EmbeddingSet set;
        std::vector<long> pop(3, 0);
        for (int i = 0; i < 200; ++i) {
            set.points.push_back(eng.normal_vector(4));
            const int e = static_cast<int>(eng.below(3));
            set.exit_ids.push_back(e);
            ++pop[static_cast<size_t>(e)];
        }
        const auto table = norm_histogram(set, 16);
        REQUIRE(table.exit_ids.size() == 3);
        for (size_t e = 0; e < 3; ++e) {
            long total = 0;
            for (long c : table.counts[e]) total += c;
            CHECK(total == pop[e]);
        }
        CHECK(table.edges.size() == 17);
    }

    SUBCASE("validation") {
        EmbeddingSet set;
        set.points = {{1.0}};
        CHECK_THROWS_AS((void)norm_histogram(set, 0), std::invalid_argument);
    }
}
