#pragma once

// File formats shared by the CLI and the experiment harness.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "lanehmm/error.hpp"
#include "lanehmm/statespace.hpp"

namespace lanehmm {

struct Observation {
    long k = 0;
    double t = 0.0;  // s
    StateEstimate est;
    bool has_cpv = false;
};

struct TruthEpoch {
    long k = 0;
    int lane = 0;
    Vec2 p = Vec2::Zero();
    Vec2 v = Vec2::Zero();
};

using TruthSequence = std::vector<TruthEpoch>;

enum class PredictionFlag { Ok, Break, Clamped };

struct Prediction {
    long k = 0;
    int lane = 0;
    PredictionFlag flag = PredictionFlag::Ok;
};

inline const char* to_string(PredictionFlag f) {
    switch (f) {
        case PredictionFlag::Break: return "break";
        case PredictionFlag::Clamped: return "clamped";
        default: return "ok";
    }
}

inline PredictionFlag parse_prediction_flag(std::string_view s) {
    if (s == "ok") return PredictionFlag::Ok;
    if (s == "break") return PredictionFlag::Break;
    if (s == "clamped") return PredictionFlag::Clamped;
    throw SchemaError("unknown prediction flag '" + std::string(s) + "'");
}

namespace csv {

inline std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        out.push_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse(std::string_view cell, const std::string& where) {
    T v{};
    const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
        throw SchemaError(where + ": cannot parse '" + std::string(cell) + "'");
    }
    return v;
}

/// Lines of a CSV text with its header checked against `expected` (prefix match on
/// the required columns). Blank lines and lines starting with '#' are skipped.
inline std::vector<std::vector<std::string_view>> rows(std::string_view text, const std::string& name,
                                                       const std::vector<std::string>& required,
                                                       const std::vector<std::string>& optional,
                                                       std::vector<std::string_view>& header) {
    std::vector<std::vector<std::string_view>> out;
    std::size_t pos = 0;
    bool have_header = false;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto cells = split(line);
        if (!have_header) {
            header = cells;
            if (cells.size() != required.size() && cells.size() != required.size() + optional.size()) {
                throw SchemaError(name + ": header has " + std::to_string(cells.size()) + " columns");
            }
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const std::string& want = i < required.size() ? required[i] : optional[i - required.size()];
                if (cells[i] != want) {
                    throw SchemaError(name + ": header column " + std::to_string(i + 1) + " is '" +
                                      std::string(cells[i]) + "', expected '" + want + "'");
                }
            }
            have_header = true;
            continue;
        }
        if (cells.size() != header.size()) {
            throw SchemaError(name + " line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        out.push_back(std::move(cells));
    }
    if (!have_header) throw SchemaError(name + ": missing header");
    return out;
}

}  // namespace csv

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename into " + path.string() + ": " + ec.message());
    }
}

inline const std::vector<std::string> kObservationColumns = {"k",      "t_s",    "n_m",    "e_m",
                                                             "vn_mps", "ve_mps", "Cpp_nn", "Cpp_ne",
                                                             "Cpp_ee", "Cvv_nn", "Cvv_ne", "Cvv_ee"};
inline const std::vector<std::string> kObservationCpvColumns = {"Cpv_nn", "Cpv_ne", "Cpv_en", "Cpv_ee"};

/// Parses and validates an observation CSV: strictly increasing k and t, PSD
/// covariances, finite values.
inline std::vector<Observation> parse_observations(std::string_view text, const std::string& name = "observations") {
    std::vector<std::string_view> header;
    const auto rows = csv::rows(text, name, kObservationColumns, kObservationCpvColumns, header);
    const bool has_cpv = header.size() == kObservationColumns.size() + kObservationCpvColumns.size();
    std::vector<Observation> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& c = rows[r];
        const std::string where = name + " row " + std::to_string(r + 1);
        std::vector<double> v(c.size());
        for (std::size_t i = 1; i < c.size(); ++i) {
            v[i] = csv::parse<double>(c[i], where);
            if (!std::isfinite(v[i])) throw SchemaError(where + ": non-finite value");
        }
        Observation o;
        o.k = csv::parse<long>(c[0], where);
        o.t = v[1];
        o.est.epoch = o.k;
        o.est.kind = EstimateKind::Posterior;
        o.est.p_hat = {v[2], v[3]};
        o.est.v_hat = {v[4], v[5]};
        o.est.C_pp << v[6], v[7], v[7], v[8];
        o.est.C_vv << v[9], v[10], v[10], v[11];
        if (has_cpv) {
            o.est.C_pv << v[12], v[13], v[14], v[15];
            o.has_cpv = true;
        }
        if (!out.empty()) {
            if (o.k <= out.back().k) throw SchemaError(where + ": k must be strictly increasing");
            if (!(o.t > out.back().t)) throw SchemaError(where + ": t_s must be strictly increasing");
        }
        try {
            validate(o.est);
        } catch (const ModelError& e) {
            throw SchemaError(where + ": " + e.what());
        }
        out.push_back(o);
    }
    return out;
}

inline std::vector<Observation> load_observations(const std::filesystem::path& path) {
    return parse_observations(read_text_file(path), path.string());
}

inline std::string format_observations(const std::vector<Observation>& obs) {
    const bool cpv = std::any_of(obs.begin(), obs.end(), [](const Observation& o) { return o.has_cpv; });
    std::ostringstream os;
    auto header = kObservationColumns;
    if (cpv) header.insert(header.end(), kObservationCpvColumns.begin(), kObservationCpvColumns.end());
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    using csv::fmt;
    for (const auto& o : obs) {
        const auto& e = o.est;
        os << o.k << ',' << fmt(o.t) << ',' << fmt(e.p_hat.x()) << ',' << fmt(e.p_hat.y()) << ',' << fmt(e.v_hat.x())
           << ',' << fmt(e.v_hat.y()) << ',' << fmt(e.C_pp(0, 0)) << ',' << fmt(e.C_pp(0, 1)) << ','
           << fmt(e.C_pp(1, 1)) << ',' << fmt(e.C_vv(0, 0)) << ',' << fmt(e.C_vv(0, 1)) << ',' << fmt(e.C_vv(1, 1));
        if (cpv) {
            os << ',' << fmt(e.C_pv(0, 0)) << ',' << fmt(e.C_pv(0, 1)) << ',' << fmt(e.C_pv(1, 0)) << ','
               << fmt(e.C_pv(1, 1));
        }
        os << '\n';
    }
    return os.str();
}

inline const std::vector<std::string> kTruthColumns = {"k", "lane_index", "n_m", "e_m", "vn_mps", "ve_mps"};

inline TruthSequence parse_truth(std::string_view text, const std::string& name = "truth") {
    std::vector<std::string_view> header;
    const auto rows = csv::rows(text, name, kTruthColumns, {}, header);
    TruthSequence out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& c = rows[r];
        const std::string where = name + " row " + std::to_string(r + 1);
        TruthEpoch t;
        t.k = csv::parse<long>(c[0], where);
        t.lane = csv::parse<int>(c[1], where);
        t.p = {csv::parse<double>(c[2], where), csv::parse<double>(c[3], where)};
        t.v = {csv::parse<double>(c[4], where), csv::parse<double>(c[5], where)};
        if (t.lane < 0) throw SchemaError(where + ": negative lane index");
        out.push_back(t);
    }
    return out;
}

inline std::string format_truth(const TruthSequence& truth) {
    std::ostringstream os;
    os << "k,lane_index,n_m,e_m,vn_mps,ve_mps\n";
    using csv::fmt;
    for (const auto& t : truth) {
        os << t.k << ',' << t.lane << ',' << fmt(t.p.x()) << ',' << fmt(t.p.y()) << ',' << fmt(t.v.x()) << ','
           << fmt(t.v.y()) << '\n';
    }
    return os.str();
}

inline const std::vector<std::string> kPredictionColumns = {"k", "lane_index", "flag"};

inline std::vector<Prediction> parse_predictions(std::string_view text, const std::string& name = "predictions") {
    std::vector<std::string_view> header;
    const auto rows = csv::rows(text, name, kPredictionColumns, {}, header);
    std::vector<Prediction> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& c = rows[r];
        const std::string where = name + " row " + std::to_string(r + 1);
        Prediction p;
        p.k = csv::parse<long>(c[0], where);
        p.lane = csv::parse<int>(c[1], where);
        if (p.lane < 0) throw SchemaError(where + ": negative lane index");
        p.flag = parse_prediction_flag(c[2]);
        out.push_back(p);
    }
    return out;
}

inline std::string format_predictions(const std::vector<Prediction>& preds) {
    std::ostringstream os;
    os << "k,lane_index,flag\n";
    for (const auto& p : preds) os << p.k << ',' << p.lane << ',' << to_string(p.flag) << '\n';
    return os.str();
}

}  // namespace lanehmm
