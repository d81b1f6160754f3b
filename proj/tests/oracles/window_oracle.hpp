#pragma once

// Sliding-window decisions recomputed from scratch for every epoch: a log-domain
// Viterbi over the window, with the propagated initial distribution rebuilt from
// epoch 0 each time.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Most likely path over epochs [s, e] given log delta_minus at s. Ties: lowest index.
inline std::vector<int> log_viterbi(const Vec& delta_minus, const std::vector<Vec>& B, const std::vector<Mat>& A,
                                    std::size_t s, std::size_t e) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    auto lg = [](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); };
    std::vector<std::vector<double>> score(e - s + 1);
    std::vector<std::vector<int>> back(e - s + 1);
    for (Eigen::Index i = 0; i < B[s].size(); ++i) score[0].push_back(lg(delta_minus(i)) + lg(B[s](i)));
    for (std::size_t k = s + 1; k <= e; ++k) {
        const std::size_t r = k - s;
        const Mat& a = A[k - 1];
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            double best = ninf;
            int arg = 0;
            bool any = false;
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                const double v = score[r - 1][static_cast<std::size_t>(i)] + lg(a(i, j));
                if (!any || v > best) {
                    best = v;
                    arg = static_cast<int>(i);
                    any = true;
                }
            }
            score[r].push_back(best + lg(B[k](j)));
            back[r].push_back(arg);
        }
    }
    std::vector<int> path(e - s + 1);
    const auto& last = score.back();
    int q = 0;
    for (std::size_t i = 1; i < last.size(); ++i) {
        if (last[i] > last[static_cast<std::size_t>(q)]) q = static_cast<int>(i);
    }
    for (std::size_t r = e - s + 1; r-- > 0;) {
        path[r] = q;
        if (r > 0) q = back[r][static_cast<std::size_t>(q)];
    }
    return path;
}

/// Per-epoch decisions of the sliding-window decoder with window length n.
inline std::vector<int> window_decisions(const Vec& pi, const std::vector<Vec>& B, const std::vector<Mat>& A,
                                         std::size_t n, bool propagated) {
    const std::size_t epochs = B.size();
    std::vector<int> out(epochs);
    const std::size_t head = std::min(n, epochs - 1);
    const auto first = log_viterbi(pi, B, A, 0, head);
    for (std::size_t k = 0; k <= head; ++k) out[k] = first[k];
    for (std::size_t k = n + 1; k < epochs; ++k) {
        const std::size_t s = k - n;
        Vec init;
        if (propagated) {
            Vec post = pi.cwiseProduct(B[0]);
            post /= post.sum();
            Vec prior;
            for (std::size_t t = 1; t <= s; ++t) {
                prior = A[t - 1].transpose() * post;
                post = prior.cwiseProduct(B[t]);
                post /= post.sum();
            }
            init = prior;
        } else {
            init = Vec::Constant(B[s].size(), 1.0 / static_cast<double>(B[s].size()));
        }
        out[k] = log_viterbi(init, B, A, s, k).back();
    }
    return out;
}

}  // namespace oracle
