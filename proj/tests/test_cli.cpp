#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "json.hpp"
#include "lanehmm/io.hpp"
#include "lanehmm/simulate.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = lanehmm::cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = testutil::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        map = (dir / "map.json").string();
        ASSERT_EQ(run({"make-map", "--out", map}).code, 0);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    void simulate(long epochs) {
        lanehmm::write_file_atomic(path("sim.json"), nlohmann::json{{"epochs", epochs}, {"seed", 3}}.dump());
        const CliRun r = run({"simulate", "--map", map, "--config", path("sim.json"), "--out-obs", path("obs.csv"),
                           "--out-truth", path("truth.csv")});
        ASSERT_EQ(r.code, 0) << r.err;
    }

    fs::path dir;
    std::string map;
};

}  // namespace

TEST_F(CliTest, EvalOnIdenticalLabels) {
    lanehmm::write_file_atomic(path("truth.csv"), "k,lane_index,n_m,e_m,vn_mps,ve_mps\n0,1,0,0,0,0\n1,2,0,0,0,0\n");
    lanehmm::write_file_atomic(path("pred.csv"), "k,lane_index,flag\n0,1,ok\n1,2,ok\n");
    const CliRun r = run({"eval", "--pred", path("pred.csv"), "--truth", path("truth.csv")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("accuracy 1.0000"), std::string::npos) << r.out;
}

TEST_F(CliTest, MissingMapIsReported) {
    lanehmm::write_file_atomic(path("obs.csv"), "k\n");
    const CliRun r = run({"decode", "--map", path("nope.json"), "--obs", path("obs.csv"), "--out", path("p.csv")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, SchemaErrorExitsWithMessage) {
    lanehmm::write_file_atomic(path("obs.csv"), "k,t_s\n0,0\n");
    const CliRun r = run({"decode", "--map", map, "--obs", path("obs.csv"), "--out", path("p.csv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("p.csv")));
}

TEST_F(CliTest, SimulateDecodeEval) {
    simulate(300);
    for (const std::vector<std::string>& extra : {std::vector<std::string>{},
                                                   {"--mode", "window", "--window", "4"},
                                                   {"--mode", "window", "--init", "propagated"}}) {
        std::vector<std::string> args{"decode", "--map", map, "--obs", path("obs.csv"), "--out", path("pred.csv")};
        args.insert(args.end(), extra.begin(), extra.end());
        const CliRun d = run(args);
        ASSERT_EQ(d.code, 0) << d.err;
        const CliRun e = run({"eval", "--pred", path("pred.csv"), "--truth", path("truth.csv"), "--obs", path("obs.csv"),
                           "--json"});
        ASSERT_EQ(e.code, 0) << e.err;
        const auto j = nlohmann::json::parse(e.out);
        for (const char* key : {"accuracy", "ci95", "breaks", "mean_h_err_m", "min_h_err_m", "max_h_err_m", "lane_changes"}) {
            EXPECT_TRUE(j.contains(key)) << key;
        }
        EXPECT_GE(j["accuracy"].get<double>(), 0.9);
        EXPECT_EQ(j["breaks"].get<int>(), 0);
    }
    const CliRun b = run({"baseline", "--map", map, "--obs", path("obs.csv"), "--d", "3", "--out", path("base.csv")});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(lanehmm::parse_predictions(lanehmm::read_text_file(path("base.csv"))).size(), 300u);
}

TEST_F(CliTest, ModelConfigIsApplied) {
    simulate(50);
    lanehmm::write_file_atomic(path("model.json"), R"({"frames": "per-lane", "q_pos": 0.1})");
    const CliRun r = run({"decode", "--map", map, "--obs", path("obs.csv"), "--model", path("model.json"), "--out",
                       path("pred.csv")});
    EXPECT_EQ(r.code, 0) << r.err;
    lanehmm::write_file_atomic(path("bad.json"), R"({"frames": "sideways"})");
    EXPECT_EQ(run({"decode", "--map", map, "--obs", path("obs.csv"), "--model", path("bad.json"), "--out",
                   path("pred.csv")})
                  .code,
              2);
}

TEST_F(CliTest, OracleSubcommand) {
    lanehmm::write_file_atomic(path("pi.json"), "[0.5, 0.5]");
    lanehmm::write_file_atomic(path("b.json"), "[[0.9, 0.1], [0.2, 0.8], [0.3, 0.7]]");
    lanehmm::write_file_atomic(path("a.json"), "[[[0.7, 0.3], [0.4, 0.6]], [[0.5, 0.5], [0.1, 0.9]]]");
    const CliRun r = run({"oracle", "--pi", path("pi.json"), "--emissions", path("b.json"), "--transitions", path("a.json")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("match yes"), std::string::npos) << r.out;
}

TEST_F(CliTest, UnknownFlagFails) {
    const CliRun r = run({"eval", "--frobnicate"});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, ExitRampMap) {
    const CliRun r = run({"make-map", "--layout", "exit-ramp", "--out", path("ramp.json")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("lanes 5"), std::string::npos);
}

TEST_F(CliTest, ShippedSamplesDecode) {
    const std::string s = LANEHMM_SAMPLES_DIR;
    const CliRun d = run({"decode", "--map", s + "/four_lane_map.json", "--obs", s + "/short_trip_obs.csv", "--model",
                       s + "/model_config.json", "--out", path("pred.csv")});
    ASSERT_EQ(d.code, 0) << d.err;
    const CliRun e = run({"eval", "--pred", path("pred.csv"), "--truth", s + "/short_trip_truth.csv", "--json"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_GE(nlohmann::json::parse(e.out)["accuracy"].get<double>(), 0.9);
    const CliRun o = run({"oracle", "--pi", s + "/oracle_pi.json", "--emissions", s + "/oracle_emissions.json",
                       "--transitions", s + "/oracle_transitions.json"});
    EXPECT_NE(o.out.find("match yes"), std::string::npos) << o.out;
    lanehmm::SimConfig::from_json(nlohmann::json::parse(lanehmm::read_text_file(s + "/sim_config.json")));
    EXPECT_EQ(run({"make-map", "--layout", "exit-ramp", "--out", path("ramp.json")}).code, 0);
    EXPECT_EQ(lanehmm::read_text_file(path("ramp.json")), lanehmm::read_text_file(s + "/exit_ramp_map.json"));
}
