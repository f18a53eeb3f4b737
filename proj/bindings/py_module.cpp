#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hypee/analysis.hpp"
#include "hypee/data_io.hpp"
#include "hypee/trigger.hpp"

namespace py = pybind11;
using namespace hypee;

namespace {

geometry::LorentzPoint point_from_space(const std::vector<double>& space, double c) {
    return geometry::lift(space, geometry::Curvature(c));
}

std::vector<double> space_of(const geometry::LorentzPoint& p) {
    return {p.space().begin(), p.space().end()};
}

} // namespace

PYBIND11_MODULE(_hypee, m) {
    m.doc() = "Lorentz-model hyperbolic geometry, entailment cones, early-exit triggering "
              "and geometric analysis";

    // ---- geometry (points passed as space coordinates; time is derived) ----
    m.def(
        "lift",
        [](const std::vector<double>& space, double c) {
            const auto p = point_from_space(space, c);
            std::vector<double> ambient(p.ambient().begin(), p.ambient().end());
            return ambient;
        },
        py::arg("space"), py::arg("c") = 1.0,
        "Lift space coordinates onto the hyperboloid; returns the ambient (time; space) vector");

    m.def(
        "lorentz_inner",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return geometry::lorentz_inner(a, b);
        },
        py::arg("a"), py::arg("b"), "Lorentzian inner product of two ambient vectors");

    m.def(
        "geodesic_distance",
        [](const std::vector<double>& x_space, const std::vector<double>& y_space, double c) {
            const geometry::Curvature curv(c);
            return geometry::geodesic_distance(point_from_space(x_space, c),
                                               point_from_space(y_space, c), curv);
        },
        py::arg("x_space"), py::arg("y_space"), py::arg("c") = 1.0);

    m.def(
        "exp_map_origin",
        [](const std::vector<double>& v, double c) {
            return space_of(geometry::exp_map_origin(geometry::TangentVector{v},
                                                     geometry::Curvature(c)));
        },
        py::arg("v"), py::arg("c") = 1.0,
        "Exponential map at the origin; returns the space coordinates of the result");

    m.def(
        "log_map_origin",
        [](const std::vector<double>& x_space, double c) {
            return geometry::log_map_origin(point_from_space(x_space, c),
                                            geometry::Curvature(c))
                .space;
        },
        py::arg("x_space"), py::arg("c") = 1.0);

    m.def(
        "spatial_norm",
        [](const std::vector<double>& x_space, double c) {
            return geometry::spatial_norm(point_from_space(x_space, c));
        },
        py::arg("x_space"), py::arg("c") = 1.0);

    m.def(
        "scale_then_lift",
        [](const std::vector<double>& z, double alpha, double c) {
            return space_of(geometry::scale_then_lift(z, alpha, geometry::Curvature(c)));
        },
        py::arg("z"), py::arg("alpha"), py::arg("c") = 1.0);

    // ---- entailment cones ----
    m.def(
        "half_aperture",
        [](const std::vector<double>& x_space, double K, double c) {
            return entailment::half_aperture(point_from_space(x_space, c),
                                             entailment::ConeConfig(K, geometry::Curvature(c)));
        },
        py::arg("x_space"), py::arg("K") = 0.1, py::arg("c") = 1.0);

    m.def(
        "exterior_angle",
        [](const std::vector<double>& x_space, const std::vector<double>& y_space, double c) {
            return entailment::exterior_angle(point_from_space(x_space, c),
                                              point_from_space(y_space, c),
                                              geometry::Curvature(c));
        },
        py::arg("x_space"), py::arg("y_space"), py::arg("c") = 1.0);

    m.def(
        "entailment_loss_pair",
        [](const std::vector<double>& parent_space, const std::vector<double>& child_space,
           double K, double c) {
            return entailment::entailment_loss_pair(
                point_from_space(parent_space, c), point_from_space(child_space, c),
                entailment::ConeConfig(K, geometry::Curvature(c)));
        },
        py::arg("parent_space"), py::arg("child_space"), py::arg("K") = 0.1, py::arg("c") = 1.0);

    m.def(
        "cone_membership",
        [](const std::vector<double>& parent_space, const std::vector<double>& candidate_space,
           double T, double K, double c) {
            return entailment::cone_membership(
                point_from_space(parent_space, c), point_from_space(candidate_space, c), T,
                entailment::ConeConfig(K, geometry::Curvature(c)));
        },
        py::arg("parent_space"), py::arg("candidate_space"), py::arg("T") = 1.0,
        py::arg("K") = 0.1, py::arg("c") = 1.0);

    // ---- triggering arithmetic ----
    m.def("gaussian_pdf", &trigger::gaussian_pdf, py::arg("x"), py::arg("mean"),
          py::arg("stddev"));

    m.def(
        "macs_saved_fraction",
        [](const std::vector<double>& cumulative_macs, int exit_index) {
            return trainer::macs_saved_fraction(trainer::CostModel{cumulative_macs}, exit_index);
        },
        py::arg("cumulative_macs"), py::arg("exit_index"));

    m.def(
        "mixture_macs_saved",
        [](const std::vector<double>& fractions, const std::vector<double>& cumulative_macs) {
            return trigger::mixture_macs_saved(fractions, trainer::CostModel{cumulative_macs});
        },
        py::arg("fractions"), py::arg("cumulative_macs"));

    // ---- analysis ----
    m.def(
        "delta_hyperbolicity",
        [](const std::vector<std::vector<double>>& points, const std::string& metric, double c) {
            const auto kind = metric == "lorentz" ? analysis::MetricKind::lorentz_geodesic
                                                  : analysis::MetricKind::euclidean;
            const auto report = analysis::delta_hyperbolicity(points, kind, c);
            py::dict out;
            out["delta"] = report.delta;
            out["diameter"] = report.diameter;
            out["delta_rel"] = report.delta_rel;
            out["c_estimate"] =
                report.c_estimate ? py::object(py::float_(*report.c_estimate)) : py::none();
            return out;
        },
        py::arg("points"), py::arg("metric") = "euclidean", py::arg("c") = 1.0);

    m.def("curvature_estimate", &analysis::curvature_estimate, py::arg("delta_rel"));

    m.def(
        "hyperbolic_kmeans",
        [](const std::vector<std::vector<double>>& points_space, int k, int max_iters,
           uint64_t seed, double c) {
            const auto res =
                analysis::hyperbolic_kmeans(points_space, k, max_iters, seed,
                                            geometry::Curvature(c));
            py::dict out;
            out["assignment"] = res.assignment;
            out["centroids"] = res.centroid_space;
            out["objective_history"] = res.objective_history;
            out["iterations"] = res.iterations;
            return out;
        },
        py::arg("points_space"), py::arg("k"), py::arg("max_iters") = 50, py::arg("seed") = 1,
        py::arg("c") = 1.0);

    // ---- synthetic data + embedding files ----
    m.def(
        "generate_synthetic",
        [](int num_superclasses, int subclasses_per_superclass, int samples_per_class,
           int input_dim, double class_spread, double superclass_separation, uint64_t seed) {
            data_io::SyntheticSpec spec;
            spec.num_superclasses = num_superclasses;
            spec.subclasses_per_superclass = subclasses_per_superclass;
            spec.samples_per_class = samples_per_class;
            spec.input_dim = input_dim;
            spec.class_spread = class_spread;
            spec.superclass_separation = superclass_separation;
            spec.seed = seed;
            const auto ds = data_io::generate_synthetic(spec);
            return py::make_tuple(ds.features, ds.labels);
        },
        py::arg("num_superclasses") = 4, py::arg("subclasses_per_superclass") = 3,
        py::arg("samples_per_class") = 100, py::arg("input_dim") = 16,
        py::arg("class_spread") = 0.5, py::arg("superclass_separation") = 6.0,
        py::arg("seed") = 1);

    m.def(
        "write_embeddings",
        [](const std::filesystem::path& path, const std::vector<std::vector<double>>& points,
           const std::vector<int>& labels, const std::vector<int>& exit_ids, double c,
           bool hyperbolic) {
            analysis::EmbeddingSet set;
            set.points = points;
            set.labels = labels;
            set.exit_ids = exit_ids;
            set.curvature = c;
            set.hyperbolic = hyperbolic;
            data_io::write_embeddings(set, path);
        },
        py::arg("path"), py::arg("points"), py::arg("labels") = std::vector<int>{},
        py::arg("exit_ids") = std::vector<int>{}, py::arg("c") = 1.0,
        py::arg("hyperbolic") = true);

    m.def(
        "read_embeddings",
        [](const std::filesystem::path& path) {
            const auto set = data_io::read_embeddings(path);
            py::dict out;
            out["points"] = set.points;
            out["labels"] = set.labels;
            out["exit_ids"] = set.exit_ids;
            out["c"] = set.curvature;
            out["hyperbolic"] = set.hyperbolic;
            return out;
        },
        py::arg("path"));

    py::register_exception<NumericError>(m, "HypeeNumericError");
    py::register_exception<IoError>(m, "HypeeIoError");
}
