#include "hypee/classifier.hpp"

#include <cmath>

namespace hypee::classifier {

namespace {

std::vector<double> flatten(const MlrHead& head) {
    const size_t n = head.hyperplanes.front().direction.size();
    std::vector<double> flat;
    flat.reserve(head.hyperplanes.size() * (n + 1));
    for (const auto& hp : head.hyperplanes) {
        if (hp.direction.size() != n) {
            throw std::invalid_argument("mlr head: inconsistent hyperplane dimensions");
        }
        flat.push_back(hp.offset);
        flat.insert(flat.end(), hp.direction.begin(), hp.direction.end());
    }
    return flat;
}

} // namespace

std::vector<double> mlr_logits(const geometry::LorentzPoint& h, const MlrHead& head) {
    if (head.num_classes() < 2) {
        throw std::invalid_argument("mlr head needs at least 2 classes");
    }
    geometry::require_on_manifold(h, head.c, "mlr_logits");
    for (size_t k = 0; k < head.num_classes(); ++k) {
        const auto& hp = head.hyperplanes[k];
        if (hp.direction.size() != h.dim()) {
            throw std::invalid_argument("mlr_logits: hyperplane dimension mismatch at class " +
                                        std::to_string(k));
        }
        double w_sq = -hp.offset * hp.offset;
        for (double d : hp.direction) w_sq += d * d;
        if (!(w_sq > 0.0)) {
            throw std::invalid_argument("mlr_logits: normal of class " + std::to_string(k) +
                                        " is not spacelike (<w,w>_L = " + std::to_string(w_sq) +
                                        ")");
        }
    }
    const std::vector<double> flat = flatten(head);
    return mlr_logits_core(h.ambient(), std::span<const double>(flat), head.num_classes(),
                           head.c.c);
}

size_t argmax_lowest(std::span<const double> logits) {
    size_t best = 0;
    for (size_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = k;
    }
    return best;
}

size_t predict(const geometry::LorentzPoint& h, const MlrHead& head) {
    const auto logits = mlr_logits(h, head);
    return argmax_lowest(logits);
}

int project_spacelike_flat(std::span<double> planes_flat, size_t num_classes) {
    const size_t stride = planes_flat.size() / num_classes;
    int projected = 0;
    for (size_t k = 0; k < num_classes; ++k) {
        double* plane = planes_flat.data() + k * stride;
        double dir_sq = 0.0;
        for (size_t i = 1; i < stride; ++i) dir_sq += plane[i] * plane[i];
        const double w_sq = dir_sq - plane[0] * plane[0];
        if (w_sq >= kSpacelikeMargin) continue;
        ++projected;
        if (dir_sq <= kSpacelikeMargin) {
            // direction collapsed; re-open it along the first axis
            plane[1] = std::sqrt(2.0 * kSpacelikeMargin);
            dir_sq = plane[1] * plane[1];
        }
        const double max_off_sq = dir_sq - kSpacelikeMargin;
        const double off = max_off_sq > 0.0 ? std::sqrt(max_off_sq) : 0.0;
        plane[0] = plane[0] >= 0.0 ? off : -off;
    }
    return projected;
}

int project_spacelike(MlrHead& head) {
    std::vector<double> flat = flatten(head);
    const int projected = project_spacelike_flat(flat, head.num_classes());
    if (projected > 0) {
        const size_t stride = flat.size() / head.num_classes();
        for (size_t k = 0; k < head.num_classes(); ++k) {
            head.hyperplanes[k].offset = flat[k * stride];
            for (size_t i = 1; i < stride; ++i) {
                head.hyperplanes[k].direction[i - 1] = flat[k * stride + i];
            }
        }
    }
    return projected;
}

} // namespace hypee::classifier
