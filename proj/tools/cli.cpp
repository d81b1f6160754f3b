#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lanehmm/lanehmm.hpp"

namespace lanehmm::cli {
namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto log = std::make_shared<spdlog::logger>("lanehmm", sink);
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("LANEHMM_LOG")) log->set_level(spdlog::level::from_str(lvl));
    return log;
}

nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path + ": invalid JSON: " + e.what());
    }
}

Eigen::VectorXd json_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw SchemaError(what + ": expected a non-empty array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw SchemaError(what + "[" + std::to_string(i) + "]: expected a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        if (v(static_cast<Eigen::Index>(i)) < 0.0) throw SchemaError(what + ": negative probability");
    }
    return v;
}

std::string join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

struct Options {
    std::string map, config, out_obs, out_truth, obs, out, model, pred, truth, pi, emissions, transitions;
    std::string mode = "batch", init = "uniform", layout = "four-lane";
    std::size_t window = 4, d = 1;
    bool json = false;
};

int cmd_simulate(const Options& o, std::ostream& out, spdlog::logger& log) {
    const LaneMap map = load_map_file(o.map);
    const SimConfig cfg = SimConfig::from_json(read_json_file(o.config));
    const SimResult r = simulate(map, cfg);
    write_file_atomic(o.out_obs, format_observations(r.observations));
    write_file_atomic(o.out_truth, format_truth(r.truth));
    log.info("simulated {} epochs", r.truth.size());
    out << "epochs " << r.truth.size() << "\nmean_h_err_m " << r.mean_horizontal_error << "\noffroad_episodes "
        << r.offroad_episodes << '\n';
    return 0;
}

int cmd_decode(const Options& o, std::ostream& out, spdlog::logger& log) {
    const LaneMap map = load_map_file(o.map);
    const auto obs = load_observations(o.obs);
    ModelConfig mc;
    if (!o.model.empty()) mc = ModelConfig::from_json(read_json_file(o.model));
    const ModelSequence seq = build_models(map, obs, mc);
    std::size_t floored = 0, curvature = 0;
    for (const auto& b : seq.emissions) {
        floored += b.denominator_floored;
        curvature += b.curvature_warning;
    }
    for (const auto& a : seq.transitions) floored += a.floored_rows;
    if (floored) log.warn("{} probability denominators were floored", floored);
    if (curvature) log.warn("{} epochs have segments shorter than 5 sigma_s", curvature);

    DecodeOptions opts;
    opts.mode = o.mode == "window" ? DecodeMode::Window : DecodeMode::Batch;
    opts.window = {o.window, o.init == "propagated" ? WindowInit::Propagated : WindowInit::Uniform};
    const LaneDecoding dec = decode_models(seq, opts);
    if (!dec.breaks.empty()) {
        log.error("decoder restarted at {} epochs, first at k = {}; the model should be break-free", dec.breaks.size(),
                  obs[dec.breaks.front()].k);
    }
    write_file_atomic(o.out, format_predictions(to_predictions(obs, dec, &seq)));
    out << "epochs " << obs.size() << "\nbreaks " << dec.breaks.size() << '\n';
    return 0;
}

int cmd_baseline(const Options& o, std::ostream& out, spdlog::logger&) {
    const LaneMap map = load_map_file(o.map);
    const auto obs = load_observations(o.obs);
    const auto lanes = centerline_baseline(obs, map, o.d);
    std::vector<Prediction> preds(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k) preds[k] = {obs[k].k, lanes[k], PredictionFlag::Ok};
    write_file_atomic(o.out, format_predictions(preds));
    out << "epochs " << obs.size() << '\n';
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out, spdlog::logger&) {
    const auto pred = parse_predictions(read_text_file(o.pred), o.pred);
    const auto truth = parse_truth(read_text_file(o.truth), o.truth);
    std::vector<Observation> obs;
    if (!o.obs.empty()) obs = load_observations(o.obs);
    const Metrics m = evaluate(pred, truth, o.obs.empty() ? nullptr : &obs);
    if (o.json) {
        out << m.to_json().dump(2) << '\n';
        return 0;
    }
    out << std::fixed << std::setprecision(4) << "accuracy " << m.accuracy << " +/- " << m.ci95_halfwidth
        << "\nbreaks " << m.breaks << "\nlane_changes " << m.lane_change_count << '\n';
    if (m.mean_horizontal_error) {
        out << "h_err_m mean " << *m.mean_horizontal_error << " min " << *m.min_horizontal_error << " max "
            << *m.max_horizontal_error << '\n';
    }
    return 0;
}

int cmd_oracle(const Options& o, std::ostream& out, spdlog::logger&) {
    InitialDistribution pi{json_vector(read_json_file(o.pi), "pi")};
    const auto bj = read_json_file(o.emissions);
    const auto aj = read_json_file(o.transitions);
    if (!bj.is_array() || !aj.is_array()) throw SchemaError("oracle: emissions and transitions must be arrays");
    std::vector<EmissionVector> b;
    for (std::size_t k = 0; k < bj.size(); ++k) {
        b.push_back({json_vector(bj[k], "emissions[" + std::to_string(k) + "]"), static_cast<long>(k)});
    }
    std::vector<TransitionMatrix> a;
    for (std::size_t k = 0; k < aj.size(); ++k) {
        const std::string what = "transitions[" + std::to_string(k) + "]";
        if (!aj[k].is_array() || aj[k].empty()) throw SchemaError(what + ": expected a matrix");
        TransitionMatrix t;
        t.epoch = static_cast<long>(k);
        for (std::size_t r = 0; r < aj[k].size(); ++r) {
            const Eigen::VectorXd row = json_vector(aj[k][r], what + "[" + std::to_string(r) + "]");
            if (r == 0) t.values.resize(static_cast<Eigen::Index>(aj[k].size()), row.size());
            if (row.size() != t.values.cols()) throw SchemaError(what + ": ragged rows");
            t.values.row(static_cast<Eigen::Index>(r)) = row.transpose();
        }
        a.push_back(std::move(t));
    }
    const auto brute = brute_force_decode(pi, b, a);
    const auto vit = viterbi_batch(pi, b, a).lanes;
    out << "brute_force " << join(brute) << "\nviterbi " << join(vit) << "\nmatch " << (brute == vit ? "yes" : "no")
        << '\n';
    return brute == vit ? 0 : 1;
}

int cmd_make_map(const Options& o, std::ostream& out, spdlog::logger&) {
    const LaneMap map = o.layout == "exit-ramp" ? make_exit_ramp_map() : make_four_lane_map();
    write_file_atomic(o.out, map_to_json(map).dump(1) + "\n");
    out << "lanes " << map.roads.front().lane_count() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto log = make_logger(err);
    CLI::App app{"Lane determination with a data-dependent HMM", "lanehmm"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic trip");
    sim->add_option("--map", o.map)->required()->check(CLI::ExistingFile);
    sim->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
    sim->add_option("--out-obs", o.out_obs)->required();
    sim->add_option("--out-truth", o.out_truth)->required();

    auto* dec = app.add_subcommand("decode", "Decode the lane sequence of an observation file");
    dec->add_option("--map", o.map)->required()->check(CLI::ExistingFile);
    dec->add_option("--obs", o.obs)->required()->check(CLI::ExistingFile);
    dec->add_option("--mode", o.mode)->check(CLI::IsMember({"batch", "window"}));
    dec->add_option("--window", o.window, "window length n (n+1 observations)")->check(CLI::PositiveNumber);
    dec->add_option("--init", o.init)->check(CLI::IsMember({"uniform", "propagated"}));
    dec->add_option("--model", o.model, "model config JSON")->check(CLI::ExistingFile);
    dec->add_option("--out", o.out)->required();

    auto* base = app.add_subcommand("baseline", "Center-line distance baseline");
    base->add_option("--map", o.map)->required()->check(CLI::ExistingFile);
    base->add_option("--obs", o.obs)->required()->check(CLI::ExistingFile);
    base->add_option("--d", o.d)->required()->check(CLI::PositiveNumber);
    base->add_option("--out", o.out)->required();

    auto* ev = app.add_subcommand("eval", "Compare predictions with truth");
    ev->add_option("--pred", o.pred)->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", o.truth)->required()->check(CLI::ExistingFile);
    ev->add_option("--obs", o.obs, "observations, for horizontal-error statistics")->check(CLI::ExistingFile);
    ev->add_flag("--json", o.json);

    auto* orc = app.add_subcommand("oracle", "Check Viterbi against exhaustive search on a small HMM");
    orc->add_option("--pi", o.pi)->required()->check(CLI::ExistingFile);
    orc->add_option("--emissions", o.emissions)->required()->check(CLI::ExistingFile);
    orc->add_option("--transitions", o.transitions)->required()->check(CLI::ExistingFile);

    auto* mm = app.add_subcommand("make-map", "Write one of the built-in synthetic maps");
    mm->add_option("--layout", o.layout)->check(CLI::IsMember({"four-lane", "exit-ramp"}));
    mm->add_option("--out", o.out)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (sim->parsed()) return cmd_simulate(o, out, *log);
        if (dec->parsed()) return cmd_decode(o, out, *log);
        if (base->parsed()) return cmd_baseline(o, out, *log);
        if (ev->parsed()) return cmd_eval(o, out, *log);
        if (orc->parsed()) return cmd_oracle(o, out, *log);
        if (mm->parsed()) return cmd_make_map(o, out, *log);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace lanehmm::cli
