// Copyright 2026 The qopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <openssl/evp.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qopt/ae.hpp"
#include "qopt/bench.hpp"
#include "qopt/noise.hpp"
#include "qopt/payoff.hpp"
#include "qopt/resources.hpp"

namespace qopt::cli {

inline constexpr const char *kVersion = "0.1.0";

using Json = nlohmann::json;
using Record = nlohmann::ordered_json;

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitResource = 3,
};

/// Malformed, incomplete or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names{"price", "convergence", "mitigate", "circuit-stats"};
    return names;
}

// ---------------------------------------------------------------------------
// Strict reading.

namespace detail {

inline std::string join_path(const std::string &path, const std::string &key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_object(const Json &j, const std::string &path) {
    if (!j.is_object()) {
        throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
    }
}

inline void check_keys(const Json &j, const std::string &path, std::initializer_list<const char *> allowed) {
    check_object(j, path);
    for (const auto &item : j.items()) {
        bool ok = false;
        for (const char *a : allowed) {
            ok = ok || item.key() == a;
        }
        if (!ok) {
            throw ConfigError("unknown key '" + join_path(path, item.key()) + "'");
        }
    }
}

inline const Json *find(const Json &j, const char *key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline const Json &require(const Json &j, const std::string &path, const char *key) {
    const Json *v = find(j, key);
    if (v == nullptr) {
        throw ConfigError("missing key '" + join_path(path, key) + "'");
    }
    return *v;
}

inline double as_number(const Json &v, const std::string &where) {
    if (!v.is_number()) {
        throw ConfigError(where + ": expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(where + ": must be finite");
    }
    return x;
}

inline int64_t as_integer(const Json &v, const std::string &where) {
    if (!v.is_number_integer()) {
        throw ConfigError(where + ": expected an integer");
    }
    return v.get<int64_t>();
}

inline uint64_t as_count(const Json &v, const std::string &where, uint64_t min = 1) {
    const int64_t x = as_integer(v, where);
    if (x < static_cast<int64_t>(min)) {
        throw ConfigError(where + ": must be >= " + std::to_string(min));
    }
    return static_cast<uint64_t>(x);
}

inline double number(const Json &j, const std::string &path, const char *key, std::optional<double> fallback = {}) {
    const Json *v = find(j, key);
    if (v == nullptr) {
        if (!fallback) {
            throw ConfigError("missing key '" + join_path(path, key) + "'");
        }
        return *fallback;
    }
    return as_number(*v, join_path(path, key));
}

inline uint64_t count(const Json &j, const std::string &path, const char *key, std::optional<uint64_t> fallback = {},
                      uint64_t min = 1) {
    const Json *v = find(j, key);
    if (v == nullptr) {
        if (!fallback) {
            throw ConfigError("missing key '" + join_path(path, key) + "'");
        }
        return *fallback;
    }
    return as_count(*v, join_path(path, key), min);
}

inline bool boolean(const Json &j, const std::string &path, const char *key, bool fallback) {
    const Json *v = find(j, key);
    if (v == nullptr) {
        return fallback;
    }
    if (!v->is_boolean()) {
        throw ConfigError(join_path(path, key) + ": expected true or false");
    }
    return v->get<bool>();
}

inline std::string string(const Json &j, const std::string &path, const char *key,
                          std::optional<std::string> fallback = {}) {
    const Json *v = find(j, key);
    if (v == nullptr) {
        if (!fallback) {
            throw ConfigError("missing key '" + join_path(path, key) + "'");
        }
        return *fallback;
    }
    if (!v->is_string()) {
        throw ConfigError(join_path(path, key) + ": expected a string");
    }
    return v->get<std::string>();
}

inline std::vector<double> numbers(const Json &v, const std::string &where) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + ": expected a non-empty array of numbers");
    }
    std::vector<double> out;
    for (size_t k = 0; k < v.size(); ++k) {
        out.push_back(as_number(v[k], where + "[" + std::to_string(k) + "]"));
    }
    return out;
}

inline std::vector<uint64_t> counts(const Json &v, const std::string &where, uint64_t min) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + ": expected a non-empty array of integers");
    }
    std::vector<uint64_t> out;
    for (size_t k = 0; k < v.size(); ++k) {
        out.push_back(as_count(v[k], where + "[" + std::to_string(k) + "]", min));
    }
    return out;
}

inline std::string one_of(const std::string &value, const std::string &where,
                          std::initializer_list<const char *> choices) {
    std::string list;
    for (const char *c : choices) {
        if (value == c) {
            return value;
        }
        list += list.empty() ? c : std::string(", ") + c;
    }
    throw ConfigError(where + ": '" + value + "' is not one of " + list);
}

inline double maturity(const Json &j, const std::string &path) {
    const bool years = find(j, "maturity") != nullptr;
    const bool days = find(j, "maturity_days") != nullptr;
    if (years == days) {
        throw ConfigError(path + ": give exactly one of 'maturity' (years) or 'maturity_days'");
    }
    return years ? number(j, path, "maturity") : number(j, path, "maturity_days") / 365.0;
}

inline LognormalModel single_model(const Json &j, const std::string &path) {
    LognormalModel m;
    m.spot = number(j, path, "spot");
    m.volatility = number(j, path, "volatility");
    m.rate = number(j, path, "rate", 0.0);
    m.maturity = maturity(j, path);
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Problem: model + grid + contract + encoding.

struct Problem {
    DiscretizedDistribution dist;
    MultivariateLognormalModel model;
    OptionSpec spec;
    PayoffOptions encoding;
};

/// "model": one asset, `assets` identical correlated assets, explicit
/// `spots`/`volatilities`/`correlation_matrix`, or a `steps`-point path.
inline MultivariateLognormalModel parse_model(const Json &j) {
    const std::string path = "model";
    detail::check_keys(j, path,
                       {"spot", "volatility", "rate", "maturity", "maturity_days", "assets", "correlation", "spots",
                        "volatilities", "correlation_matrix", "steps", "truncation_stddevs"});
    const bool explicit_assets = detail::find(j, "spots") != nullptr;
    const bool identical = detail::find(j, "assets") != nullptr;
    const bool path_mode = detail::find(j, "steps") != nullptr;
    if (explicit_assets + identical + path_mode > 1) {
        throw ConfigError("model: 'spots', 'assets' and 'steps' are mutually exclusive");
    }
    if (explicit_assets) {
        for (const char *k : {"spot", "volatility", "correlation"}) {
            if (detail::find(j, k) != nullptr) {
                throw ConfigError(std::string("model.") + k + " conflicts with model.spots");
            }
        }
        auto spots = detail::numbers(j["spots"], "model.spots");
        auto vols = detail::numbers(detail::require(j, path, "volatilities"), "model.volatilities");
        std::vector<double> corr;
        if (const Json *c = detail::find(j, "correlation_matrix")) {
            corr = detail::numbers(*c, "model.correlation_matrix");
        } else {
            corr.assign(spots.size() * spots.size(), 0.0);
            for (size_t k = 0; k < spots.size(); ++k) {
                corr[k * spots.size() + k] = 1.0;
            }
        }
        return MultivariateLognormalModel::assets(std::move(spots), std::move(vols), std::move(corr),
                                                  detail::number(j, path, "rate", 0.0), detail::maturity(j, path));
    }
    for (const char *k : {"volatilities", "correlation_matrix"}) {
        if (detail::find(j, k) != nullptr) {
            throw ConfigError(std::string("model.") + k + " needs model.spots");
        }
    }
    const LognormalModel one = detail::single_model(j, path);
    if (path_mode) {
        if (detail::find(j, "correlation") != nullptr) {
            throw ConfigError("model.correlation does not apply to a path model");
        }
        return MultivariateLognormalModel::path(one, static_cast<int>(detail::count(j, path, "steps")));
    }
    const int d = identical ? static_cast<int>(detail::count(j, path, "assets")) : 1;
    return MultivariateLognormalModel::identical_assets(d, one, detail::number(j, path, "correlation", 0.0));
}

inline OptionSpec parse_option(const Json &j) {
    const std::string path = "option";
    detail::check_object(j, path);
    const std::string type = detail::one_of(detail::string(j, path, "type"), "option.type",
                                            {"european_call", "european_put", "basket", "asian", "barrier",
                                             "portfolio"});
    if (type == "european_call" || type == "european_put" || type == "asian") {
        detail::check_keys(j, path, {"type", "strike"});
        const double k = detail::number(j, path, "strike");
        if (type == "european_call") {
            return EuropeanCall{k};
        }
        if (type == "european_put") {
            return EuropeanPut{k};
        }
        return Asian{k};
    }
    if (type == "basket") {
        detail::check_keys(j, path, {"type", "strike", "weights"});
        return Basket{detail::numbers(detail::require(j, path, "weights"), "option.weights"),
                      detail::number(j, path, "strike")};
    }
    if (type == "barrier") {
        detail::check_keys(j, path, {"type", "strike", "barrier", "kind", "crossing"});
        Barrier b;
        b.strike = detail::number(j, path, "strike");
        b.barrier = detail::number(j, path, "barrier");
        const auto kind = detail::one_of(detail::string(j, path, "kind", "knock_in"), "option.kind",
                                         {"knock_in", "knock_out"});
        b.kind = kind == "knock_in" ? BarrierKind::kKnockIn : BarrierKind::kKnockOut;
        const auto crossing =
            detail::one_of(detail::string(j, path, "crossing", "up"), "option.crossing", {"up", "down"});
        b.crossing = crossing == "up" ? BarrierCrossing::kUp : BarrierCrossing::kDown;
        return b;
    }
    detail::check_keys(j, path, {"type", "strikes", "segments"});
    Portfolio p;
    if (const Json *s = detail::find(j, "strikes")) {
        p.strikes = detail::numbers(*s, "option.strikes");
    }
    const Json &segs = detail::require(j, path, "segments");
    if (!segs.is_array() || segs.size() != p.strikes.size() + 1) {
        throw ConfigError("option.segments: expected an array of one more segment than strikes");
    }
    for (size_t k = 0; k < segs.size(); ++k) {
        const std::string where = "option.segments[" + std::to_string(k) + "]";
        detail::check_keys(segs[k], where, {"slope", "intercept"});
        p.segments.push_back({detail::number(segs[k], where, "slope", 0.0),
                              detail::number(segs[k], where, "intercept", 0.0)});
    }
    return p;
}

inline PayoffOptions parse_encoding(const Json *j) {
    PayoffOptions opt;
    if (j == nullptr) {
        return opt;
    }
    const std::string path = "encoding";
    detail::check_keys(*j, path, {"c", "style", "max_denominator"});
    opt.c = detail::number(*j, path, "c", opt.c);
    const auto style =
        detail::one_of(detail::string(*j, path, "style", "auto"), "encoding.style", {"auto", "generic", "uniform"});
    opt.style = style == "auto" ? RotationStyle::kAuto
                : style == "generic" ? RotationStyle::kGeneric
                                     : RotationStyle::kUniform;
    opt.max_denominator = detail::count(*j, path, "max_denominator", opt.max_denominator);
    return opt;
}

/// "qubits": one integer for every dimension or one per dimension.
inline std::vector<int> parse_qubits(const Json &j, int dims) {
    std::vector<uint64_t> q;
    if (j.is_array()) {
        q = detail::counts(j, "qubits", 1);
    } else {
        q.assign(static_cast<size_t>(dims), detail::as_count(j, "qubits"));
    }
    if (q.size() != static_cast<size_t>(dims)) {
        throw ConfigError("qubits: expected " + std::to_string(dims) + " entries");
    }
    std::vector<int> out;
    for (uint64_t v : q) {
        if (v > 20) {
            throw ConfigError("qubits: at most 20 per dimension");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

inline Problem parse_problem(const Json &config) {
    Problem p;
    p.model = parse_model(detail::require(config, "", "model"));
    const double trunc = detail::number(config["model"], "model", "truncation_stddevs", 3.0);
    const auto qubits = parse_qubits(detail::require(config, "", "qubits"), p.model.dimension());
    p.spec = parse_option(detail::require(config, "", "option"));
    p.encoding = parse_encoding(detail::find(config, "encoding"));
    p.dist = discretize_multivariate(p.model, qubits, trunc);
    return p;
}

// ---------------------------------------------------------------------------
// Output records.

struct Provenance {
    std::string config_hash;
    uint64_t seed = 0;
};

struct CommandOutput {
    /// Every line of the .jsonl file.
    std::vector<Record> records;
    /// Rows of the CSV export; all share the first row's columns.
    std::vector<Record> rows;
    /// One line for the terminal.
    std::string summary;
};

/// SHA-256 of the canonical (sorted-key, compact) serialization.
inline std::string config_hash(const Json &config) {
    const std::string text = config.dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("config hash: digest failed");
    }
    static const char *const hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 15];
    }
    return out;
}

inline Record stamp(Record r, const Provenance &prov) {
    r["config_hash"] = prov.config_hash;
    r["seed"] = prov.seed;
    r["version"] = kVersion;
    return r;
}

inline std::string to_jsonl(const std::vector<Record> &records) {
    std::string out;
    for (const auto &r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::string csv_cell(const Record &v) {
    if (v.is_null()) {
        return "";
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (char ch : s) {
            q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        }
        return q + "\"";
    }
    if (v.is_array()) {
        std::string s;
        for (size_t k = 0; k < v.size(); ++k) {
            s += (k ? ";" : "") + csv_cell(v[k]);
        }
        return s;
    }
    return v.dump();
}

}  // namespace detail

inline std::string to_csv(const std::vector<Record> &rows) {
    if (rows.empty()) {
        return "";
    }
    std::vector<std::string> columns;
    for (const auto &item : rows.front().items()) {
        columns.push_back(item.key());
    }
    std::string out;
    for (size_t c = 0; c < columns.size(); ++c) {
        out += (c ? "," : "") + columns[c];
    }
    out += '\n';
    for (const auto &r : rows) {
        for (size_t c = 0; c < columns.size(); ++c) {
            auto it = r.find(columns[c]);
            out += (c ? "," : "") + (it == r.end() ? std::string() : detail::csv_cell(*it));
        }
        out += '\n';
    }
    return out;
}

/// Writes through a sibling temp file and renames over `path`.
inline void write_atomic(const std::filesystem::path &path, const std::string &content) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw ResourceError("cannot open " + tmp.string() + " for writing");
        }
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) {
            std::filesystem::remove(tmp);
            throw ResourceError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw ResourceError("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

/// foo.jsonl -> foo.csv; anything else gets .csv appended.
inline std::filesystem::path csv_path_for(const std::filesystem::path &jsonl) {
    auto p = jsonl;
    if (p.extension() == ".jsonl") {
        p.replace_extension(".csv");
    } else {
        p += ".csv";
    }
    return p;
}

// ---------------------------------------------------------------------------
// Commands.

namespace detail {

inline void check_top_level(const Json &config, std::initializer_list<const char *> section) {
    check_object(config, "");
    for (const auto &item : config.items()) {
        bool ok = item.key() == "seed" || item.key() == "output";
        for (const char *s : section) {
            ok = ok || item.key() == s;
        }
        if (!ok) {
            throw ConfigError("unknown key '" + item.key() + "'");
        }
    }
}

inline Record json_vector(const std::vector<double> &v) {
    Record a = Record::array();
    for (double x : v) {
        a.push_back(x);
    }
    return a;
}

inline void check_budget(int qubits, uint64_t budget, const char *what) {
    if (static_cast<uint64_t>(qubits) > budget) {
        throw ResourceError(std::string(what) + " needs " + std::to_string(qubits) + " qubits, budget is " +
                            std::to_string(budget));
    }
}

}  // namespace detail

struct AeConfig {
    AEMethod method = AEMethod::kQpeAnalytic;
    int m = 5;
    uint64_t shots = 1;
    uint64_t runs = 1;
    uint64_t max_qubits = kMaxSimulatedQubits;
    std::vector<uint64_t> powers;
};

inline AeConfig parse_ae(const Json &j) {
    const std::string path = "ae";
    detail::check_keys(j, path, {"method", "m", "shots", "runs", "max_qubits", "powers"});
    AeConfig c;
    const auto method = detail::one_of(detail::string(j, path, "method"), "ae.method",
                                       {"qpe_circuit", "qpe_analytic", "mle"});
    c.method = method == "qpe_circuit" ? AEMethod::kQpeCircuit
               : method == "mle"       ? AEMethod::kMle
                                       : AEMethod::kQpeAnalytic;
    c.shots = detail::count(j, path, "shots", c.method == AEMethod::kMle ? 100 : 1);
    c.runs = detail::count(j, path, "runs", 1);
    c.max_qubits = detail::count(j, path, "max_qubits", c.max_qubits);
    if (const Json *p = detail::find(j, "powers")) {
        if (c.method != AEMethod::kMle) {
            throw ConfigError("ae.powers only applies to method 'mle'");
        }
        if (detail::find(j, "m") != nullptr) {
            throw ConfigError("ae: give 'm' or 'powers', not both");
        }
        c.powers = detail::counts(*p, "ae.powers", 0);
    } else {
        const uint64_t m = detail::count(j, path, "m", {}, c.method == AEMethod::kMle ? 0 : 1);
        if (m > 24) {
            throw ConfigError("ae.m: at most 24");
        }
        c.m = static_cast<int>(m);
    }
    return c;
}

inline CommandOutput cmd_price(const Json &config, const Provenance &prov) {
    detail::check_top_level(config, {"model", "qubits", "option", "encoding", "ae"});
    const Problem p = parse_problem(config);
    const AeConfig ae = parse_ae(detail::require(config, "", "ae"));
    const AOperator a = build_A(p.dist, p.spec, p.encoding);
    const int n = a.circuit.num_qubits();
    detail::check_budget(ae.method == AEMethod::kQpeCircuit ? n + ae.m : n, ae.max_qubits, "price");

    MLESchedule schedule;
    if (ae.method == AEMethod::kMle) {
        schedule = ae.powers.empty() ? MLESchedule::exponential(ae.m, ae.shots) : MLESchedule{ae.powers, ae.shots};
        schedule.validate();
    }
    const double exact_p1 = a.exact_P1();
    const double grid_value = a.grid_value();
    const double encoded_value = a.post_map(exact_p1);
    const double theta = grover_angle(exact_p1);

    CommandOutput out;
    double sum = 0.0;
    uint64_t in_band = 0;
    uint64_t in_bound = 0;
    for (uint64_t r = 0; r < ae.runs; ++r) {
        const uint64_t run_seed = derive_seed(prov.seed, r);
        AEResult res;
        switch (ae.method) {
            case AEMethod::kQpeCircuit:
                res = run_qpe_ae_circuit(a, ae.m, ae.shots, run_seed);
                break;
            case AEMethod::kQpeAnalytic:
                res = run_qpe_ae_analytic(theta, ae.m, ae.shots, run_seed, &a.scaling);
                break;
            case AEMethod::kMle:
                res = run_mle_ae(a, schedule, run_seed);
                break;
        }
        const double amp_err = std::abs(res.a_hat - exact_p1);
        const double price_err = std::abs(res.expected_payoff - encoded_value);
        const bool band = amp_err <= res.amplitude_error_bound;
        const bool bound = price_err <= res.error_bound;
        sum += res.expected_payoff;
        in_band += band;
        in_bound += bound;
        Record row;
        row["record"] = "run";
        row["run"] = r;
        row["method"] = ae_method_name(res.method);
        row["M"] = res.M;
        row["shots"] = res.shots;
        row["run_seed"] = run_seed;
        row["a_hat"] = res.a_hat;
        row["exact_p1"] = exact_p1;
        row["amplitude_error"] = amp_err;
        row["amplitude_error_bound"] = res.amplitude_error_bound;
        row["within_amplitude_bound"] = band;
        row["estimate"] = res.expected_payoff;
        row["encoded_value"] = encoded_value;
        row["grid_value"] = grid_value;
        row["price_error"] = price_err;
        row["error_bound"] = res.error_bound;
        row["within_error_bound"] = bound;
        row["degenerate"] = res.degenerate;
        out.rows.push_back(stamp(row, prov));
    }
    out.records = out.rows;
    Record s;
    s["record"] = "summary";
    s["command"] = "price";
    s["option"] = option_name(p.spec);
    s["method"] = ae_method_name(ae.method);
    s["runs"] = ae.runs;
    s["qubits"] = n;
    s["payoff_qubit"] = a.payoff_qubit;
    s["exact_p1"] = exact_p1;
    s["grid_value"] = grid_value;
    s["encoded_value"] = encoded_value;
    s["encoding_bias"] = encoded_value - grid_value;
    s["mean_estimate"] = sum / static_cast<double>(ae.runs);
    s["within_amplitude_bound_frequency"] = static_cast<double>(in_band) / static_cast<double>(ae.runs);
    s["within_error_bound_frequency"] = static_cast<double>(in_bound) / static_cast<double>(ae.runs);
    s["warnings"] = a.warnings;
    out.records.push_back(stamp(s, prov));
    std::ostringstream line;
    line.precision(8);
    line << option_name(p.spec) << " " << ae_method_name(ae.method) << ": estimate " << sum / ae.runs << ", grid value "
         << grid_value << ", within bound " << in_bound << "/" << ae.runs;
    out.summary = line.str();
    return out;
}

inline ConvergenceOptions parse_convergence(const Json *j) {
    ConvergenceOptions opt;
    if (j == nullptr) {
        return opt;
    }
    const std::string path = "convergence";
    detail::check_keys(*j, path, {"m_min", "m_max", "trials", "level", "ae_shots"});
    opt.m_min = static_cast<int>(detail::count(*j, path, "m_min", opt.m_min));
    opt.m_max = static_cast<int>(std::min<uint64_t>(detail::count(*j, path, "m_max", opt.m_max), 64));
    opt.trials = detail::count(*j, path, "trials", opt.trials);
    opt.level = detail::number(*j, path, "level", opt.level);
    opt.ae_shots = detail::count(*j, path, "ae_shots", opt.ae_shots);
    if (!(opt.level > 0.0 && opt.level < 1.0)) {
        throw ConfigError("convergence.level: must lie in (0, 1)");
    }
    return opt;
}

inline bool in_band(double x, double lo, double hi) {
    return x >= lo && x <= hi;
}

inline CommandOutput cmd_convergence(const Json &config, const Provenance &prov) {
    detail::check_top_level(config, {"model", "qubits", "option", "encoding", "convergence"});
    const Problem p = parse_problem(config);
    const ConvergenceOptions opt = parse_convergence(detail::find(config, "convergence"));
    const AOperator a = build_A(p.dist, p.spec, p.encoding);
    const ConvergenceStudy study = run_convergence_study(a, opt, prov.seed);

    CommandOutput out;
    for (const auto &r : study.rows) {
        Record ae;
        ae["record"] = "row";
        ae["method"] = "ae";
        ae["m"] = r.m;
        ae["M"] = r.M;
        ae["error"] = r.ae_error;
        ae["bound"] = r.ae_bound;
        ae["within_bound_frequency"] = r.ae_within_bound;
        out.rows.push_back(stamp(ae, prov));
        Record mc;
        mc["record"] = "row";
        mc["method"] = "mc";
        mc["m"] = r.m;
        mc["M"] = r.M;
        mc["error"] = r.mc_error;
        mc["bound"] = nullptr;
        mc["within_bound_frequency"] = nullptr;
        out.rows.push_back(stamp(mc, prov));
    }
    out.records = out.rows;
    double min_freq = 1.0;
    for (const auto &r : study.rows) {
        min_freq = std::min(min_freq, r.ae_within_bound);
    }
    Record s;
    s["record"] = "summary";
    s["command"] = "convergence";
    s["option"] = option_name(p.spec);
    s["trials"] = study.trials;
    s["level"] = study.level;
    s["grid_value"] = study.grid_value;
    s["encoded_value"] = study.encoded_value;
    s["ae_slope"] = study.ae_slope;
    s["mc_slope"] = study.mc_slope;
    s["ae_slope_in_band"] = in_band(study.ae_slope, -1.15, -0.85);
    s["mc_slope_in_band"] = in_band(study.mc_slope, -0.6, -0.4);
    s["min_within_bound_frequency"] = min_freq;
    s["bound_frequency_ok"] = min_freq >= kAeConfidence - 0.03;
    s["crossover_M"] = study.crossover;
    out.records.push_back(stamp(s, prov));
    std::ostringstream line;
    line.precision(4);
    line << "ae slope " << study.ae_slope << ", mc slope " << study.mc_slope << ", crossover M "
         << study.crossover;
    out.summary = line.str();
    return out;
}

inline NoiseModel parse_noise(const Json &j) {
    const std::string path = "noise";
    detail::check_keys(j, path, {"device_like", "p1", "p2", "readout_flips", "readout_matrix"});
    NoiseModel m;
    if (detail::boolean(j, path, "device_like", false)) {
        if (detail::find(j, "p1") != nullptr || detail::find(j, "p2") != nullptr) {
            throw ConfigError("noise: device_like fixes p1 and p2; drop them or device_like");
        }
        m = NoiseModel::device_like();
    }
    m.p1 = detail::number(j, path, "p1", m.p1);
    m.p2 = detail::number(j, path, "p2", m.p2);
    if (const Json *f = detail::find(j, "readout_flips")) {
        m.readout_flips = detail::numbers(*f, "noise.readout_flips");
    }
    if (const Json *r = detail::find(j, "readout_matrix")) {
        m.readout_matrix = detail::numbers(*r, "noise.readout_matrix");
    }
    try {
        m.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    return m;
}

inline CommandOutput cmd_mitigate(const Json &config, const Provenance &prov) {
    detail::check_top_level(config, {"noise", "mitigation"});
    if (detail::find(config, "noise") == nullptr) {
        throw ConfigError("mitigate needs a 'noise' block");
    }
    const NoiseModel noise = parse_noise(config["noise"]);
    MitigationSweepConfig sweep;
    MitigationOptions opt;
    if (const Json *j = detail::find(config, "mitigation")) {
        const std::string path = "mitigation";
        detail::check_keys(*j, path,
                           {"base", "qubits", "strike", "c", "grover_power", "spots", "factors", "shots",
                            "calibration_shots", "readout_correction"});
        if (const Json *b = detail::find(*j, "base")) {
            detail::check_keys(*b, "mitigation.base", {"spot", "volatility", "rate", "maturity", "maturity_days"});
            sweep.base = detail::single_model(*b, "mitigation.base");
        }
        const uint64_t q = detail::count(*j, path, "qubits", static_cast<uint64_t>(sweep.qubits));
        if (q > 8) {
            throw ConfigError("mitigation.qubits: at most 8");
        }
        sweep.qubits = static_cast<int>(q);
        sweep.strike = detail::number(*j, path, "strike", sweep.strike);
        sweep.c = detail::number(*j, path, "c", sweep.c);
        sweep.grover_power = detail::count(*j, path, "grover_power", sweep.grover_power, 0);
        if (const Json *s = detail::find(*j, "spots")) {
            sweep.spots = detail::numbers(*s, "mitigation.spots");
        }
        if (const Json *f = detail::find(*j, "factors")) {
            opt.factors.clear();
            for (uint64_t v : detail::counts(*f, "mitigation.factors", 1)) {
                if (v % 2 == 0) {
                    throw ConfigError("mitigation.factors: fold factors must be odd");
                }
                opt.factors.push_back(static_cast<int>(v));
            }
        }
        opt.shots = detail::count(*j, path, "shots", opt.shots);
        opt.calibration_shots = detail::count(*j, path, "calibration_shots", opt.calibration_shots);
        opt.readout_correction = detail::boolean(*j, path, "readout_correction", opt.readout_correction);
    }
    const auto rows = run_mitigation_sweep(sweep, noise, opt, prov.seed);

    CommandOutput out;
    for (const auto &row : rows) {
        const auto a = fixed_grid_call(sweep, row.spot);
        const auto &rep = row.report;
        Record r;
        r["record"] = "row";
        r["spot"] = row.spot;
        r["grid_value"] = a.grid_value();
        r["noiseless_p1"] = rep.noiseless_p1;
        for (size_t k = 0; k < rep.factors.size(); ++k) {
            const std::string f = std::to_string(rep.factors[k]);
            r["cnots_f" + f] = rep.cnots[k];
            r["raw_p1_f" + f] = rep.raw_p1[k];
            r["corrected_p1_f" + f] = rep.corrected_p1[k];
        }
        r["extrapolated_p1"] = rep.extrapolated.value;
        r["extrapolated_unclipped"] = rep.extrapolated.unclipped;
        r["clipped"] = rep.extrapolated.clipped;
        r["raw_error"] = rep.raw_error();
        r["mitigated_error"] = rep.mitigated_error();
        r["price_noiseless"] = a.post_map(rep.noiseless_p1);
        r["price_raw"] = a.post_map(rep.raw_p1.front());
        r["price_mitigated"] = a.post_map(rep.extrapolated.value);
        out.rows.push_back(stamp(r, prov));
    }
    out.records = out.rows;
    const double efficacy = mitigation_efficacy(rows);
    Record s;
    s["record"] = "summary";
    s["command"] = "mitigate";
    s["spots"] = sweep.spots.size();
    s["p1"] = noise.p1;
    s["p2"] = noise.p2;
    s["shots"] = opt.shots;
    s["readout_correction"] = opt.readout_correction && noise.has_readout();
    s["efficacy_ratio"] = efficacy;
    s["efficacy_ok"] = efficacy <= 0.5;
    out.records.push_back(stamp(s, prov));
    std::ostringstream line;
    line.precision(4);
    line << sweep.spots.size() << " spots, mitigated/raw error ratio " << efficacy;
    out.summary = line.str();
    return out;
}

inline CommandOutput cmd_circuit_stats(const Json &config, const Provenance &prov) {
    detail::check_top_level(config, {"model", "qubits", "option", "encoding", "stats"});
    const Problem p = parse_problem(config);
    std::vector<std::string> circuits{"a", "grover", "qpe"};
    std::vector<uint64_t> ms{1, 2, 3};
    GateBasis basis = GateBasis::kToffoli;
    if (const Json *j = detail::find(config, "stats")) {
        const std::string path = "stats";
        detail::check_keys(*j, path, {"circuits", "m", "basis"});
        if (const Json *c = detail::find(*j, "circuits")) {
            if (!c->is_array() || c->empty()) {
                throw ConfigError("stats.circuits: expected a non-empty array of names");
            }
            circuits.clear();
            for (const auto &v : *c) {
                if (!v.is_string()) {
                    throw ConfigError("stats.circuits: expected strings");
                }
                circuits.push_back(
                    detail::one_of(v.get<std::string>(), "stats.circuits", {"empty", "a", "grover", "qpe"}));
            }
        }
        if (const Json *m = detail::find(*j, "m")) {
            ms = detail::counts(*m, "stats.m", 1);
        }
        basis = detail::one_of(detail::string(*j, path, "basis", "toffoli"), "stats.basis", {"toffoli", "cnot"}) ==
                        "toffoli"
                    ? GateBasis::kToffoli
                    : GateBasis::kCnot;
    }
    const AOperator a = build_A(p.dist, p.spec, p.encoding);

    CommandOutput out;
    auto emit = [&](const std::string &name, const Circuit &c, std::optional<uint64_t> m) {
        const auto d = decompose(c, basis);
        auto rep = count_resources(d.circuit);
        rep.ancillas = d.ancillas;
        Record r;
        r["record"] = "circuit";
        r["circuit"] = name;
        r["m"] = m ? Record(*m) : Record(nullptr);
        r["basis"] = basis == GateBasis::kToffoli ? "toffoli" : "cnot";
        r["qubits"] = rep.qubits;
        r["ancillas"] = rep.ancillas;
        r["single_qubit"] = rep.single_qubit;
        r["cnot"] = rep.cnot;
        r["toffoli"] = rep.toffoli;
        r["total"] = rep.total();
        r["depth"] = rep.depth;
        out.rows.push_back(stamp(r, prov));
    };
    for (const auto &name : circuits) {
        if (name == "empty") {
            emit(name, a.circuit.empty_copy(), {});
        } else if (name == "a") {
            emit(name, a.circuit, {});
        } else if (name == "grover") {
            emit(name, build_grover(a).circuit, {});
        } else {
            for (uint64_t m : ms) {
                if (m > 24) {
                    throw ConfigError("stats.m: at most 24");
                }
                emit(name, qpe_circuit(a.circuit, a.payoff_qubit, static_cast<int>(m)), m);
            }
        }
    }
    out.records = out.rows;
    Record s;
    s["record"] = "summary";
    s["command"] = "circuit-stats";
    s["option"] = option_name(p.spec);
    s["connectivity"] = "all-to-all";
    s["note"] = "counts depend on the decomposition rules used here; not comparable gate-for-gate with other "
                "published counts";
    out.records.push_back(stamp(s, prov));
    out.summary = std::to_string(out.rows.size()) + " circuits counted";
    return out;
}

/// Library argument errors during setup surface as config errors.
inline CommandOutput run_command(const std::string &command, const Json &config, const Provenance &prov) {
    try {
        if (command == "price") {
            return cmd_price(config, prov);
        }
        if (command == "convergence") {
            return cmd_convergence(config, prov);
        }
        if (command == "mitigate") {
            return cmd_mitigate(config, prov);
        }
        if (command == "circuit-stats") {
            return cmd_circuit_stats(config, prov);
        }
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("unknown command '" + command + "'");
}

/// Seed precedence: explicit override, then the config's "seed", then 0.
inline uint64_t resolve_seed(const Json &config, std::optional<uint64_t> override_seed) {
    if (override_seed) {
        return *override_seed;
    }
    if (const Json *s = detail::find(config, "seed")) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<int64_t>() >= 0)) {
            throw ConfigError("seed: expected a non-negative integer");
        }
        return s->get<uint64_t>();
    }
    return 0;
}

inline Json load_config(const std::filesystem::path &path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot read config " + path.string());
    }
    try {
        return Json::parse(f);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace qopt::cli
