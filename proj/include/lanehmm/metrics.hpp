#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "json.hpp"
#include "lanehmm/error.hpp"
#include "lanehmm/io.hpp"

namespace lanehmm {

struct Metrics {
    double accuracy = 0.0;
    double ci95_halfwidth = 0.0;
    std::size_t breaks = 0;
    std::optional<double> mean_horizontal_error;  // m; needs observations
    std::optional<double> min_horizontal_error;
    std::optional<double> max_horizontal_error;
    std::size_t lane_change_count = 0;

    nlohmann::json to_json() const {
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
        return {{"accuracy", accuracy},
                {"ci95", ci95_halfwidth},
                {"breaks", breaks},
                {"mean_h_err_m", opt(mean_horizontal_error)},
                {"min_h_err_m", opt(min_horizontal_error)},
                {"max_h_err_m", opt(max_horizontal_error)},
                {"lane_changes", lane_change_count}};
    }
};

/// Normal-approximation half-width of the 95% interval for a proportion.
inline double ci95_halfwidth(double p, std::size_t n) {
    if (n == 0) return 0.0;
    return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

/// Break epochs count as wrong. Horizontal errors are filled in when observations are
/// supplied (they must align with the truth epochs).
inline Metrics evaluate(const std::vector<Prediction>& pred, const TruthSequence& truth,
                        const std::vector<Observation>* obs = nullptr) {
    if (pred.size() != truth.size()) {
        throw ModelError("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " truth epochs");
    }
    Metrics m;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].k != truth[k].k) throw ModelError("evaluate: epoch index mismatch at row " + std::to_string(k + 1));
        const bool broke = pred[k].flag == PredictionFlag::Break;
        if (broke) ++m.breaks;
        if (!broke && pred[k].lane == truth[k].lane) ++correct;
        if (k > 0 && truth[k].lane != truth[k - 1].lane) ++m.lane_change_count;
    }
    const std::size_t n = pred.size();
    m.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    m.ci95_halfwidth = ci95_halfwidth(m.accuracy, n);
    if (obs) {
        if (obs->size() != truth.size()) throw ModelError("evaluate: observation count differs from truth");
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double e = ((*obs)[k].est.p_hat - truth[k].p).norm();
            sum += e;
            lo = std::min(lo, e);
            hi = std::max(hi, e);
        }
        if (n) {
            m.mean_horizontal_error = sum / static_cast<double>(n);
            m.min_horizontal_error = lo;
            m.max_horizontal_error = hi;
        }
    }
    return m;
}

inline std::vector<Prediction> plain_predictions(const TruthSequence& truth, const std::vector<int>& lanes,
                                                 const std::vector<std::size_t>& breaks = {}) {
    std::vector<Prediction> out(lanes.size());
    for (std::size_t k = 0; k < lanes.size(); ++k) out[k] = {truth.at(k).k, lanes[k], PredictionFlag::Ok};
    for (std::size_t b : breaks) out.at(b).flag = PredictionFlag::Break;
    return out;
}

}  // namespace lanehmm
