#include <random>

#include <gtest/gtest.h>

#include "lanehmm/pipeline.hpp"
#include "lanehmm/simulate.hpp"
#include "lanehmm/window.hpp"
#include "oracles/window_oracle.hpp"
#include "test_util.hpp"

using namespace lanehmm;

namespace {

struct Dense {
    std::vector<Eigen::VectorXd> B;
    std::vector<Eigen::MatrixXd> A;
};

Dense dense(const std::vector<EmissionVector>& b, const std::vector<TransitionMatrix>& a) {
    Dense d;
    for (const auto& e : b) d.B.push_back(e.values);
    for (const auto& t : a) d.A.push_back(t.values);
    return d;
}

/// Model sequence for a simulated drive with lane changes.
ModelSequence simulated_models(std::uint64_t seed, long epochs) {
    static const LaneMap map = make_four_lane_map();
    SimConfig cfg;
    cfg.seed = seed;
    cfg.epochs = epochs;
    const SimResult sim = simulate(map, cfg);
    return build_models(map, sim.observations, ModelConfig{});
}

}  // namespace

TEST(WindowDecoder, LongWindowEqualsBatch) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = testutil::random_hmm(rng, 4, 12);
        const auto batch = viterbi_batch(h.pi, h.B, h.A);
        for (std::size_t n : {11u, 12u, 40u}) {
            EXPECT_EQ(viterbi_window_uniform(h.pi, h.B, h.A, n).lanes, batch.lanes);
            EXPECT_EQ(viterbi_window_propagated(h.pi, h.B, h.A, n).lanes, batch.lanes);
        }
    }
}

TEST(WindowDecoder, StationaryVehicleKeepsLane) {
    const LaneMap map = make_four_lane_map();
    const auto& set = map.roads[0];
    const auto pose = set.frame(1, 20);
    std::vector<Observation> obs;
    for (long k = 0; k < 60; ++k) {
        Observation o;
        o.k = k;
        o.t = static_cast<double>(k);
        o.est.p_hat = lane_to_intersection({5.0, 5.6}, pose);
        o.est.C_pp = 0.09 * Mat2::Identity();
        o.est.C_vv = 0.01 * Mat2::Identity();
        o.est.epoch = k;
        obs.push_back(o);
    }
    const auto seq = build_models(map, obs, ModelConfig{});
    for (auto mode : {WindowInit::Uniform, WindowInit::Propagated}) {
        const auto r = viterbi_window(seq.pi, seq.emissions, seq.transitions, {4, mode});
        for (int lane : r.lanes) EXPECT_EQ(lane, 2);
    }
}

TEST(WindowDecoder, MatchesOracleOnSimulatedTrace) {
    const auto seq = simulated_models(3, 200);
    const Dense d = dense(seq.emissions, seq.transitions);
    for (bool propagated : {false, true}) {
        const auto ref = oracle::window_decisions(seq.pi.values, d.B, d.A, 4, propagated);
        const auto got = propagated ? viterbi_window_propagated(seq.pi, seq.emissions, seq.transitions, 4)
                                    : viterbi_window_uniform(seq.pi, seq.emissions, seq.transitions, 4);
        EXPECT_EQ(got.lanes, ref) << (propagated ? "propagated" : "uniform");
    }
}

TEST(WindowDecoder, MatchesOracleOnRandomChains) {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 40; ++trial) {
        const auto h = testutil::random_hmm(rng, 3 + trial % 3, 30);
        const Dense d = dense(h.B, h.A);
        for (std::size_t n : {1u, 2u, 4u, 7u}) {
            EXPECT_EQ(viterbi_window_uniform(h.pi, h.B, h.A, n).lanes, oracle::window_decisions(h.pi.values, d.B, d.A, n, false));
            EXPECT_EQ(viterbi_window_propagated(h.pi, h.B, h.A, n).lanes,
                      oracle::window_decisions(h.pi.values, d.B, d.A, n, true));
        }
    }
}

TEST(WindowDecoder, OneHotEmissionsAreFollowed) {
    std::mt19937_64 rng(63);
    auto h = testutil::random_hmm(rng, 4, 25);
    std::vector<int> truth;
    for (std::size_t k = 0; k < h.B.size(); ++k) {
        const int s = static_cast<int>(k * 7 % 4);
        h.B[k].values = Eigen::VectorXd::Unit(4, s);
        truth.push_back(s);
    }
    EXPECT_EQ(viterbi_window_uniform(h.pi, h.B, h.A, 4).lanes, truth);
    EXPECT_EQ(viterbi_window_propagated(h.pi, h.B, h.A, 4).lanes, truth);
}

TEST(WindowDecoder, StreamingPublishesInOrder) {
    std::mt19937_64 rng(64);
    const auto h = testutil::random_hmm(rng, 3, 10);
    SlidingWindowDecoder dec({3, WindowInit::Uniform}, h.pi);
    EXPECT_THROW(dec.push(h.B[0], &h.A[0]), ModelError);
    std::vector<std::size_t> published;
    for (std::size_t k = 0; k < h.B.size(); ++k) {
        const auto out = dec.push(h.B[k], k == 0 ? nullptr : &h.A[k - 1]);
        const std::size_t expected = k < 3 ? 0 : (k == 3 ? 4 : 1);
        EXPECT_EQ(out.size(), expected) << k;
        for (const auto& d : out) published.push_back(d.epoch);
    }
    EXPECT_TRUE(dec.finish().empty());
    ASSERT_EQ(published.size(), h.B.size());
    for (std::size_t k = 0; k < published.size(); ++k) EXPECT_EQ(published[k], k);
    EXPECT_EQ(dec.epochs_seen(), h.B.size());
}

TEST(WindowDecoder, ShortStreamFinishesInBatch) {
    std::mt19937_64 rng(65);
    const auto h = testutil::random_hmm(rng, 3, 3);
    SlidingWindowDecoder dec({4, WindowInit::Propagated}, h.pi);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(dec.push(h.B[k], k == 0 ? nullptr : &h.A[k - 1]).empty());
    const auto out = dec.finish();
    ASSERT_EQ(out.size(), 3u);
    const auto batch = viterbi_batch(h.pi, h.B, h.A);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out[k].lane, batch.lanes[k]);
}

TEST(WindowConfig, RejectsZeroLength) {
    EXPECT_THROW(SlidingWindowDecoder({0, WindowInit::Uniform}, initial_distribution(2)), ModelError);
}
