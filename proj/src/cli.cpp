// Copyright 2026 The wvalab Authors
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

#include "wvalab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "wvalab/coupling.hpp"
#include "wvalab/error.hpp"
#include "wvalab/infometrics.hpp"

namespace wvalab::cli {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kPi = std::numbers::pi;

// ---- field tables shared by the reader and the writer ----

template <class F> void fields(F &&f, TrappedIonSweep &s) {
    f("gammas", s.gammas);
    f("theta_points", s.theta_points);
    f("sigma", s.sigma);
    f("simulate", s.simulate);
}
template <class F> void fields(F &&f, BudgetSweep &s) {
    f("g_over_2sigma", s.g_over_2sigma);
    f("sigma", s.sigma);
    f("theta_points", s.theta_points);
    f("pf_points", s.pf_points);
}
template <class F> void fields(F &&f, NoiseTable &s) {
    f("p_f", s.p_f);
    f("weak_value", s.weak_value);
    f("tau_c", s.tau_c);
    f("tolerance", s.tolerance);
}
template <class F> void fields(F &&f, StandardSpec &s) {
    f("kind", s.kind);
    f("g", s.g);
    f("angle", s.angle);
    f("sigma", s.sigma);
    f("grid_points", s.grid_points);
}
template <class F> void fields(F &&f, InverseSpec &s) {
    f("kind", s.kind);
    f("g", s.g);
    f("angle", s.angle);
    f("sigma", s.sigma);
    f("grid_points", s.grid_points);
}
template <class F> void fields(F &&f, AbwvaSpec &s) {
    f("g", s.g);
    f("epsilon", s.epsilon);
    f("sigma", s.sigma);
    f("grid_points", s.grid_points);
}
template <class F> void fields(F &&f, JointWmBlock &s) {
    f("tau", s.tau);
    f("phi", s.phi);
    f("epsilon", s.epsilon);
    f("omega_det", s.omega_det);
    f("omega0", s.omega0);
    f("spread", s.spread);
    f("points", s.points);
    f("photons", s.photons);
    f("trials", s.trials);
}
template <class F> void fields(F &&f, BiasedSpec &s) {
    f("tau", s.tau);
    f("beta", s.beta);
    f("epsilon", s.epsilon);
    f("omega0", s.omega0);
    f("delta", s.delta);
    f("resolution", s.resolution);
    f("grid_points", s.grid_points);
}
template <class F> void fields(F &&f, RecycleSpec &s) {
    f("p_f", s.p_f);
    f("loss", s.loss);
    f("rounds", s.rounds);
    f("mirror_r", s.mirror_r);
}
template <class F> void fields(F &&f, PhaseSpaceBlock &s) {
    f("g", s.g);
    f("epsilon", s.epsilon);
    f("meter", s.meter);
    f("mean_photons", s.mean_photons);
    f("sweep", s.sweep);
}
template <class F> void fields(F &&f, EntangledSpec &s) {
    f("phi", s.phi);
    f("epsilon", s.epsilon);
    f("n", s.n);
    f("post", s.post);
    f("variant", s.variant);
}
template <class F> void fields(F &&f, CorrelatedNoiseModel &s) {
    f("a", s.a);
    f("c", s.c);
    f("dt", s.dt);
    f("tau_c", s.tau_c);
    f("n", s.n);
}
template <class F> void fields(F &&f, ExperimentBlock &s) {
    f("nu", s.nu);
    f("trials", s.trials);
    f("seed", s.seed);
    f("estimator", s.estimator);
    f("grid_points", s.grid_points);
    f("keep_samples", s.keep_samples);
}
template <class F> void fields(F &&f, OutputBlock &s) {
    f("directory", s.directory);
    f("format", s.format);
    f("checks", s.checks);
}

template <class T> struct TypeName;
template <> struct TypeName<TrappedIonSweep> { static constexpr const char *value = "trapped_ion"; };
template <> struct TypeName<BudgetSweep> { static constexpr const char *value = "budget"; };
template <> struct TypeName<NoiseTable> { static constexpr const char *value = "noise_table"; };
template <> struct TypeName<StandardSpec> { static constexpr const char *value = "standard"; };
template <> struct TypeName<InverseSpec> { static constexpr const char *value = "inverse"; };
template <> struct TypeName<AbwvaSpec> { static constexpr const char *value = "abwva"; };
template <> struct TypeName<JointWmBlock> { static constexpr const char *value = "joint_wm"; };
template <> struct TypeName<BiasedSpec> { static constexpr const char *value = "biased"; };
template <> struct TypeName<RecycleSpec> { static constexpr const char *value = "recycle"; };
template <> struct TypeName<PhaseSpaceBlock> { static constexpr const char *value = "phase_space"; };
template <> struct TypeName<EntangledSpec> { static constexpr const char *value = "entangled"; };

// ---- enum spellings ----

template <class E> struct Spelling;
template <> struct Spelling<WeakValueKind> {
    static constexpr std::pair<WeakValueKind, const char *> table[] = {{WeakValueKind::Real, "real"},
                                                                       {WeakValueKind::Imaginary, "imaginary"}};
};
template <> struct Spelling<EntangledPost> {
    static constexpr std::pair<EntangledPost, const char *> table[] = {{EntangledPost::MaxProb, "max_prob"},
                                                                       {EntangledPost::MaxWeakValue, "max_weak_value"}};
};
template <> struct Spelling<EntangledVariant> {
    static constexpr std::pair<EntangledVariant, const char *> table[] = {
        {EntangledVariant::Entangled, "entangled"}, {EntangledVariant::Iterative, "iterative"}};
};
template <> struct Spelling<Estimator> {
    static constexpr std::pair<Estimator, const char *> table[] = {
        {Estimator::AMR, "AMR"}, {Estimator::MLE_Correlated, "MLE_Correlated"}, {Estimator::MLE_Grid, "MLE_Grid"}};
};

template <class E>
concept Spelled = requires { Spelling<E>::table; };

// ---- key → line index ----

class LineIndex {
  public:
    LineIndex(const std::string &text, const ojson &root) : text_(text) {
        walk(root, "");
    }
    int line(const std::string &path) const {
        auto it = lines_.find(path);
        return it == lines_.end() ? 1 : it->second;
    }

  private:
    void walk(const ojson &j, const std::string &path) {
        if (j.is_object()) {
            for (auto it = j.begin(); it != j.end(); ++it) {
                const std::string quoted = ojson(it.key()).dump();
                std::size_t pos = cursor_;
                while ((pos = text_.find(quoted, pos)) != std::string::npos) {
                    std::size_t k = pos + quoted.size();
                    while (k < text_.size() && std::isspace(static_cast<unsigned char>(text_[k]))) {
                        ++k;
                    }
                    if (k < text_.size() && text_[k] == ':') {
                        break;
                    }
                    pos += quoted.size();
                }
                if (pos == std::string::npos) {
                    continue;
                }
                const std::string child = path + "/" + it.key();
                lines_[child] = 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
                cursor_ = pos + quoted.size();
                walk(it.value(), child);
            }
        } else if (j.is_array()) {
            for (std::size_t i = 0; i < j.size(); ++i) {
                walk(j[i], path + "/" + std::to_string(i));
            }
        }
    }

    const std::string &text_;
    std::size_t cursor_ = 0;
    std::map<std::string, int> lines_;
};

class Reader {
  public:
    explicit Reader(const LineIndex &idx) : idx_(idx) {}

    [[noreturn]] void error(const std::string &path, const std::string &msg) const {
        fail(ErrorCode::ConfigError, "line " + std::to_string(idx_.line(path)) + ": " + msg + " (" + path + ")");
    }

    void read(const ojson &j, const std::string &path, double &out) const {
        if (!j.is_number()) {
            error(path, "expected a number");
        }
        out = j.get<double>();
        if (!std::isfinite(out)) {
            error(path, "number must be finite");
        }
    }
    void read(const ojson &j, const std::string &path, int &out) const {
        long long v;
        read(j, path, v);
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            error(path, "integer out of range");
        }
        out = static_cast<int>(v);
    }
    void read(const ojson &j, const std::string &path, long &out) const {
        long long v;
        read(j, path, v);
        out = static_cast<long>(v);
    }
    void read(const ojson &j, const std::string &path, long long &out) const {
        if (j.is_number_integer()) {
            if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(
                                                                        std::numeric_limits<long long>::max())) {
                error(path, "integer out of range");
            }
            out = j.get<long long>();
            return;
        }
        if (j.is_number_float()) {
            const double d = j.get<double>();
            if (std::nearbyint(d) == d && std::abs(d) < 9e15) {
                out = static_cast<long long>(d);
                return;
            }
        }
        error(path, "expected an integer");
    }
    void read(const ojson &j, const std::string &path, std::uint64_t &out) const {
        if (j.is_number_unsigned()) {
            out = j.get<std::uint64_t>();
            return;
        }
        error(path, "expected a non-negative integer");
    }
    void read(const ojson &j, const std::string &path, bool &out) const {
        if (!j.is_boolean()) {
            error(path, "expected true or false");
        }
        out = j.get<bool>();
    }
    void read(const ojson &j, const std::string &path, std::string &out) const {
        if (!j.is_string()) {
            error(path, "expected a string");
        }
        out = j.get<std::string>();
    }
    template <class T> void read(const ojson &j, const std::string &path, std::vector<T> &out) const {
        if (!j.is_array()) {
            error(path, "expected an array");
        }
        out.clear();
        for (std::size_t i = 0; i < j.size(); ++i) {
            T v{};
            read(j[i], path + "/" + std::to_string(i), v);
            out.push_back(v);
        }
    }
    template <class T> void read(const ojson &j, const std::string &path, std::optional<T> &out) const {
        T v{};
        read(j, path, v);
        out = std::move(v);
    }
    template <Spelled E> void read(const ojson &j, const std::string &path, E &out) const {
        std::string s;
        read(j, path, s);
        std::string options;
        for (const auto &[value, name] : Spelling<E>::table) {
            if (s == name) {
                out = value;
                return;
            }
            options += options.empty() ? name : std::string(", ") + name;
        }
        error(path, "unknown value '" + s + "', expected one of: " + options);
    }

    template <class T> void object(const ojson &j, const std::string &path, T &out, bool allow_type = false) const {
        if (!j.is_object()) {
            error(path, "expected an object");
        }
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (allow_type && it.key() == "type") {
                continue;
            }
            bool known = false;
            fields([&](const char *name, auto &) { known = known || it.key() == name; }, out);
            if (!known) {
                error(path + "/" + it.key(), "unknown key '" + it.key() + "'");
            }
        }
        fields(
            [&](const char *name, auto &field) {
                if (j.contains(name)) {
                    read(j.at(name), path + "/" + name, field);
                }
            },
            out);
    }

  private:
    const LineIndex &idx_;
};

ojson write_value(double v) {
    return v;
}
ojson write_value(int v) {
    return v;
}
ojson write_value(long v) {
    return v;
}
ojson write_value(long long v) {
    return v;
}
ojson write_value(std::uint64_t v) {
    return v;
}
ojson write_value(bool v) {
    return v;
}
ojson write_value(const std::string &v) {
    return v;
}
template <Spelled E> ojson write_value(E v) {
    for (const auto &[value, name] : Spelling<E>::table) {
        if (value == v) {
            return name;
        }
    }
    return nullptr;
}
template <class T> ojson write_value(const std::vector<T> &v) {
    ojson a = ojson::array();
    for (const auto &x : v) {
        a.push_back(write_value(x));
    }
    return a;
}

template <class T> ojson write_object(T copy) {
    ojson j = ojson::object();
    fields(
        [&](const char *name, const auto &field) {
            if constexpr (requires { field.has_value(); }) {
                if (field) {
                    j[name] = write_value(*field);
                }
            } else {
                j[name] = write_value(field);
            }
        },
        copy);
    return j;
}

template <class T> bool try_scheme(const Reader &r, const ojson &j, const std::string &type, SchemeBlock &out) {
    if (type != TypeName<T>::value) {
        return false;
    }
    T spec{};
    r.object(j, "/scheme", spec, true);
    out = spec;
    return true;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void add_check(CommandResult &res, std::string name, bool pass, double value, double limit, std::string detail) {
    res.checks.push_back({std::move(name), pass, value, limit, std::move(detail)});
}

template <class T> const T &block_as(const ScenarioConfig &config, const char *command) {
    if (const T *p = std::get_if<T>(&config.scheme)) {
        return *p;
    }
    fail(ErrorCode::ConfigError, std::string("line 1: command '") + command + "' needs scheme type '" +
                                     TypeName<T>::value + "', got '" + scheme_type(config.scheme) + "'");
}

ojson report_json(const SchemeReport &r) {
    nlohmann::json j = r;
    return ojson::parse(j.dump());
}

Table distribution_table(const std::string &name, const std::string &xname, const SampledDistribution &d) {
    Table t{name, {xname, "density"}, {}};
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        t.rows.push_back({d.x(i), d.values(i)});
    }
    return t;
}

}  // namespace

std::string scheme_type(const SchemeBlock &block) {
    return std::visit([](const auto &b) { return std::string(TypeName<std::decay_t<decltype(b)>>::value); }, block);
}

ScenarioConfig parse_config(const std::string &text) {
    ojson root;
    try {
        root = ojson::parse(text);
    } catch (const ojson::parse_error &e) {
        const int line = 1 + static_cast<int>(std::count(text.begin(),
                                                         text.begin() + static_cast<long>(std::min(e.byte, text.size())),
                                                         '\n'));
        fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + e.what());
    }
    LineIndex idx(text, root);
    Reader r(idx);
    if (!root.is_object()) {
        r.error("", "config must be an object");
    }
    for (auto it = root.begin(); it != root.end(); ++it) {
        const std::string &k = it.key();
        if (k != "scheme" && k != "noise" && k != "experiment" && k != "output") {
            r.error("/" + k, "unknown key '" + k + "'");
        }
    }
    if (!root.contains("scheme")) {
        r.error("", "missing 'scheme' block");
    }
    const ojson &sj = root.at("scheme");
    if (!sj.is_object() || !sj.contains("type")) {
        r.error("/scheme", "scheme block needs a 'type'");
    }
    std::string type;
    r.read(sj.at("type"), "/scheme/type", type);
    ScenarioConfig cfg;
    const bool ok = try_scheme<TrappedIonSweep>(r, sj, type, cfg.scheme) || try_scheme<BudgetSweep>(r, sj, type, cfg.scheme) ||
                    try_scheme<NoiseTable>(r, sj, type, cfg.scheme) || try_scheme<StandardSpec>(r, sj, type, cfg.scheme) ||
                    try_scheme<InverseSpec>(r, sj, type, cfg.scheme) || try_scheme<AbwvaSpec>(r, sj, type, cfg.scheme) ||
                    try_scheme<JointWmBlock>(r, sj, type, cfg.scheme) || try_scheme<BiasedSpec>(r, sj, type, cfg.scheme) ||
                    try_scheme<RecycleSpec>(r, sj, type, cfg.scheme) ||
                    try_scheme<PhaseSpaceBlock>(r, sj, type, cfg.scheme) ||
                    try_scheme<EntangledSpec>(r, sj, type, cfg.scheme);
    if (!ok) {
        r.error("/scheme/type", "unknown scheme type '" + type + "'");
    }
    if (root.contains("noise") && !root.at("noise").is_null()) {
        CorrelatedNoiseModel m;
        r.object(root.at("noise"), "/noise", m);
        try {
            m.validate();
        } catch (const Error &e) {
            r.error("/noise", e.what());
        }
        cfg.noise = m;
    }
    if (root.contains("experiment")) {
        r.object(root.at("experiment"), "/experiment", cfg.experiment);
    }
    if (root.contains("output")) {
        r.object(root.at("output"), "/output", cfg.output);
        if (cfg.output.format != "csv" && cfg.output.format != "json") {
            r.error("/output/format", "format must be 'csv' or 'json'");
        }
    }
    return cfg;
}

ScenarioConfig load_config(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::ConfigError, "line 0: cannot open config '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

nlohmann::ordered_json to_json(const ScenarioConfig &config) {
    ojson j = ojson::object();
    ojson s = ojson::object();
    s["type"] = scheme_type(config.scheme);
    ojson body = std::visit([](const auto &b) { return write_object(b); }, config.scheme);
    for (auto it = body.begin(); it != body.end(); ++it) {
        s[it.key()] = it.value();
    }
    j["scheme"] = s;
    if (config.noise) {
        j["noise"] = write_object(*config.noise);
    }
    j["experiment"] = write_object(config.experiment);
    j["output"] = write_object(config.output);
    return j;
}

bool operator==(const ScenarioConfig &a, const ScenarioConfig &b) {
    return to_json(a) == to_json(b);
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string Table::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        out += (i ? "," : "") + header[i];
    }
    out += '\n';
    for (const auto &row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) {
                out += ',';
            }
            std::visit(
                [&](const auto &v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, double>) {
                        out += format_double(v);
                    } else if constexpr (std::is_same_v<V, long long>) {
                        out += std::to_string(v);
                    } else {
                        out += v;
                    }
                },
                row[i]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json Table::to_json() const {
    ojson j = ojson::object();
    j["name"] = name;
    j["header"] = header;
    ojson rs = ojson::array();
    for (const auto &row : rows) {
        ojson r = ojson::array();
        for (const auto &c : row) {
            std::visit([&](const auto &v) { r.push_back(v); }, c);
        }
        rs.push_back(r);
    }
    j["rows"] = rs;
    return j;
}

// ---- commands ----

CommandResult cmd_shift(const ScenarioConfig &config) {
    const auto &s = block_as<TrappedIonSweep>(config, "shift");
    if (s.theta_points < 2 || s.gammas.empty() || !(s.sigma > 0.0)) {
        fail(ErrorCode::ConfigError, "line 1: trapped_ion needs theta_points >= 2, gammas, sigma > 0");
    }
    CommandResult res;
    res.command = "shift";
    Table t{"shift", {"theta"}, {}};
    for (double gm : s.gammas) {
        t.header.push_back("closed_gamma_" + format_double(gm));
        if (s.simulate) {
            t.header.push_back("grid_gamma_" + format_double(gm));
        }
    }
    double worst = 0.0;
    for (int k = 0; k < s.theta_points; ++k) {
        const double theta = (k + 1) * (kPi / 2) / (s.theta_points + 1);
        std::vector<Cell> row{theta};
        for (double gm : s.gammas) {
            const double g = gm * s.sigma;
            const double closed = trapped_ion_shift(gm, theta, g) / g;
            row.emplace_back(closed);
            if (s.simulate) {
                auto joint = evolve_joint(bloch_state(0, 0), GaussianMeter(s.sigma),
                                          CouplingConfig{g, Generator::MomentumKick, Observable::pauli_x()});
                CVector post(2);
                post << std::sin(theta), -std::cos(theta);
                auto ps = postselect(joint, SystemState(post));
                const double grid = std::get<GridMeter>(*ps.success_meter).mean_q() / g;
                row.emplace_back(grid);
                worst = std::max(worst, std::abs(grid - closed) / std::max(std::abs(closed), 1e-12));
            }
        }
        t.rows.push_back(std::move(row));
    }
    res.tables.push_back(std::move(t));
    if (s.simulate) {
        add_check(res, "grid_matches_closed_form", worst <= 0.01, worst, 0.01, "max relative deviation");
    }
    res.report["gammas"] = s.gammas;
    return res;
}

CommandResult cmd_budget(const ScenarioConfig &config) {
    const auto &s = block_as<BudgetSweep>(config, "budget");
    if (s.theta_points < 2 || s.pf_points < 2 || !(s.sigma > 0.0) || !(s.g_over_2sigma > 0.0)) {
        fail(ErrorCode::ConfigError, "line 1: budget needs theta_points, pf_points >= 2 and positive g, sigma");
    }
    CommandResult res;
    res.command = "budget";
    const double g = 2.0 * s.sigma * s.g_over_2sigma;
    const Observable A = Observable::pauli_z();
    const GaussianMeter meter(s.sigma);
    const CouplingConfig cfg{g, Generator::MomentumKick, A};

    Table t{"budget", {"theta_i", "p_f", "q_wva_ratio", "f_p_ratio", "q_r_ratio", "sum"}, {}};
    double worst = 0.0;
    for (int k = 0; k < s.theta_points; ++k) {
        const double theta = (k + 1) * (kPi / 2) / (s.theta_points + 1);
        const SystemState pre = bloch_state(theta, 0.0);
        const InfoBudget b = info_budget(pre, optimal_postselection(pre, A), cfg, meter);
        const double sum = (b.pf_qf + b.pr_qr + b.f_p) / b.q_jt;
        worst = std::max(worst, std::abs(sum - 1.0));
        t.rows.push_back({theta, b.p_f, b.pf_qf / b.q_jt, b.f_p / b.q_jt, b.pr_qr / b.q_jt, sum});
    }
    res.tables.push_back(std::move(t));
    add_check(res, "budget_identity", worst <= 1e-6, worst, 1e-6, "max |sum of ratios − 1|");

    // Max-FI curves against p_f (log spaced from 1e-4 to 1). Real: pre bloch(θ), post bloch(−θ), Q readout.
    // Imaginary: pre on the equator, post bloch(−π/2, φ), P readout.
    Table c{"pf_curves", {"p_f_target", "p_f_real", "fi_real", "q_wva_real", "p_f_imag", "fi_imag", "q_wva_imag"}, {}};
    const double q_jt = qfi_joint(bloch_state(kPi / 2, 0.0), meter, cfg);
    EvolveOptions opts;
    opts.span = 8.0 * (s.sigma + g);
    bool monotone = true;
    double prev = -1.0;
    double real_at_one = 0.0;
    double imag_peak = 0.0, imag_last = 0.0, imag_over_real = 0.0;
    for (int k = 0; k < s.pf_points; ++k) {
        const double target = std::pow(10.0, -4.0 + 4.0 * k / (s.pf_points - 1));
        std::vector<Cell> row{target};
        {
            const double theta = std::acos(std::sqrt(target));
            const SystemState pre = bloch_state(theta, 0.0);
            const SystemState post = bloch_state(-theta, 0.0);
            auto readout = [&](double gg) {
                PostSelectedMeter ps = postselect(
                    evolve_joint(pre, meter, CouplingConfig{gg, Generator::MomentumKick, A}, opts), post);
                return ps;
            };
            ParamDistribution fam;
            fam.masses = [&](double gg) {
                SampledDistribution d = std::get<GridMeter>(*readout(gg).success_meter).position_distribution();
                return Eigen::VectorXd(d.values * (d.dx / d.mass()));
            };
            const PostSelectedMeter ps = readout(g);
            const double fi = ps.p_f * classical_fisher(fam, g).fi / q_jt;
            const PostSelectedQfi q = qfi_postselected(pre, post, cfg, meter);
            row.insert(row.end(), {Cell{ps.p_f}, Cell{fi}, Cell{q.p_f * q.q_f / q_jt}});
            monotone = monotone && fi >= prev - 1e-9;
            prev = fi;
            real_at_one = fi;
        }
        if (target <= 0.5) {
            const double angle = 2.0 * std::asin(std::sqrt(target));
            const StandardResult sr = standard_scheme({WeakValueKind::Imaginary, g, angle, s.sigma});
            const PostSelectedQfi q = qfi_postselected(bloch_state(kPi / 2, 0.0), bloch_state(-kPi / 2, angle), cfg,
                                                       meter);
            const double fi = sr.report.fisher / q_jt;
            const double qw = q.p_f * q.q_f / q_jt;
            row.insert(row.end(), {Cell{sr.report.p_f}, Cell{fi}, Cell{qw}});
            imag_peak = std::max(imag_peak, fi);
            imag_last = fi;
            imag_over_real = std::max(imag_over_real, fi / prev);
        } else {
            row.insert(row.end(), {Cell{std::string()}, Cell{std::string()}, Cell{std::string()}});
        }
        c.rows.push_back(std::move(row));
    }
    res.tables.push_back(std::move(c));
    add_check(res, "real_fi_monotone_in_p_f", monotone, prev, 0.0, "real-WVA max FI / Q_jt non-decreasing in p_f");
    add_check(res, "real_fi_at_p_f_one_is_cm", std::abs(real_at_one - 1.0) <= 1e-3, real_at_one, 1.0,
              "p_f = 1 recovers F_CM = Q_jt");
    add_check(res, "imag_fi_not_above_real", imag_over_real <= 1.0 + 1e-6, imag_over_real, 1.0,
              "max imaginary / real FI at equal p_f target");
    add_check(res, "imag_fi_falls_at_large_p_f", imag_last < imag_peak, imag_last / imag_peak, 1.0,
              "imaginary FI at the largest p_f over its peak");
    res.report["g"] = g;
    res.report["q_jt"] = q_jt;
    return res;
}

CommandResult cmd_noise(const ScenarioConfig &config) {
    const auto &s = block_as<NoiseTable>(config, "noise");
    if (!config.noise) {
        fail(ErrorCode::ConfigError, "line 1: command 'noise' needs a noise block");
    }
    if (!(s.p_f > 0.0 && s.p_f <= 1.0)) {
        fail(ErrorCode::ConfigError, "line 1: p_f must lie in (0, 1]");
    }
    CommandResult res;
    res.command = "noise";
    const AmrScheme wva = s.weak_value == 0.0 ? AmrScheme::wva_tradeoff(s.p_f) : AmrScheme::wva(s.p_f, s.weak_value);
    std::vector<double> taus = s.tau_c.empty() ? std::vector<double>{config.noise->tau_c} : s.tau_c;
    Table t{"table1",
            {"regime", "tau_over_dt", "n", "p_f", "weak_value", "i_cm_analytic", "i_cm_numeric", "f_cm", "i_wva_analytic",
             "i_wva_numeric", "f_wva"},
            {}};
    double worst_cm = 0.0, worst_wva = 0.0, worst_white = 0.0;
    bool any_white = false;
    for (double tau : taus) {
        CorrelatedNoiseModel m = *config.noise;
        m.tau_c = tau;
        m.validate();
        const NoiseRegime regime = classify_noise_regime(m, s.p_f);
        const double icm_a = amr_information(m, AmrScheme::cm());
        const double icm_n = amr_information_numeric(m, AmrScheme::cm());
        const double fcm = cm_fisher_correlated(m);
        const double iw_a = amr_information(m, wva);
        const double iw_n = amr_information_numeric(m, wva);
        // Kept samples on a regular 1/p_f lattice.
        CorrelatedNoiseModel kept = m;
        kept.dt = m.dt / s.p_f;
        kept.n = std::max(1L, std::lround(s.p_f * static_cast<double>(m.n)));
        const double fw = wva.weak_value * wva.weak_value * cm_fisher_correlated(kept);
        worst_cm = std::max(worst_cm, std::abs(icm_n / icm_a - 1.0));
        worst_wva = std::max(worst_wva, std::abs(iw_n / iw_a - 1.0));
        if (regime == NoiseRegime::White) {
            any_white = true;
            const double ref = static_cast<double>(m.n) / (m.a + m.c);
            for (double v : {icm_n, fcm, iw_n, fw}) {
                worst_white = std::max(worst_white, std::abs(v / ref - 1.0));
            }
        }
        t.rows.push_back({std::string(to_string(regime)), tau / m.dt, static_cast<long long>(m.n), s.p_f,
                          wva.weak_value, icm_a, icm_n, fcm, iw_a, iw_n, fw});
    }
    res.tables.push_back(std::move(t));
    add_check(res, "cm_numeric_matches_analytic", worst_cm <= s.tolerance, worst_cm, s.tolerance,
              "max relative deviation of AMR CM information");
    add_check(res, "wva_numeric_matches_analytic", worst_wva <= s.tolerance, worst_wva, s.tolerance,
              "max relative deviation of AMR WVA information");
    if (any_white) {
        add_check(res, "white_columns_equal", worst_white <= s.tolerance, worst_white, s.tolerance,
                  "white rows: every column against N/(a+c)");
    }
    return res;
}

namespace {

void scheme_standard(const StandardSpec &spec, CommandResult &res) {
    const StandardResult r = standard_scheme(spec);
    res.report["scheme"] = report_json(r.report);
    res.report["weak_value"] = {r.weak_value.real(), r.weak_value.imag()};
    res.report["grid_shifts"] = {{"q", r.grid_shifts.q}, {"p", r.grid_shifts.p}};
    res.report["exact_shifts"] = {{"q", r.exact_shifts.q}, {"p", r.exact_shifts.p}};
    res.report["aav_margin"] = r.aav_margin;
    res.tables.push_back(distribution_table("outcome", spec.kind == WeakValueKind::Real ? "q" : "p", r.outcome));
    const double grid = spec.kind == WeakValueKind::Real ? r.grid_shifts.q : r.grid_shifts.p;
    const double exact = spec.kind == WeakValueKind::Real ? r.exact_shifts.q : r.exact_shifts.p;
    const double dev = exact != 0.0 ? std::abs(grid / exact - 1.0) : std::abs(grid);
    add_check(res, "grid_shift_matches_exact", dev <= 1e-3, dev, 1e-3, "relative deviation");
    add_check(res, "fisher_below_qfi", r.report.fisher <= r.report.q_bound * (1.0 + 1e-4),
              r.report.fisher / r.report.q_bound, 1.0, "FI / QFI");
}

void scheme_inverse(const InverseSpec &spec, CommandResult &res) {
    const InverseResult r = inverse_scheme(spec);
    res.report["scheme"] = report_json(r.report);
    res.report["overlap"] = r.overlap;
    res.report["validity_ratio"] = r.validity_ratio;
    res.report["grid_shifts"] = {{"q", r.grid_shifts.q}, {"p", r.grid_shifts.p}};
    res.report["q_closed_form"] = r.q_closed_form;
    res.report["p_closed_form"] = r.p_closed_form;
    res.report["matching_quadrature"] = r.matching_quadrature;
    res.report["p_f_closed_form"] = r.p_f_closed_form;
    res.report["angle_estimate"] = r.angle_estimate;
    res.tables.push_back(distribution_table("outcome", "q", r.outcome));
    add_check(res, "fisher_below_qfi", r.report.fisher <= r.report.q_bound * (1.0 + 1e-4),
              r.report.fisher / r.report.q_bound, 1.0, "FI / QFI about the angle");
}

void scheme_abwva(const AbwvaSpec &spec, CommandResult &res) {
    const AbwvaResult r = abwva_scheme(spec);
    res.report["scheme"] = report_json(r.report);
    res.report["centroid"] = r.centroid;
    res.report["centroid_closed_form"] = r.centroid_closed_form;
    res.report["signal_abwva"] = r.signal_abwva;
    res.report["signal_standard"] = r.signal_standard;
    Table t{"abwva", {"p", "p0", "p1", "p2", "difference"}, {}};
    for (Eigen::Index i = 0; i < r.p.size(); ++i) {
        t.rows.push_back({r.p(i), r.p0(i), r.p1(i), r.p2(i), r.difference(i)});
    }
    res.tables.push_back(std::move(t));
    const bool bitwise = r.sum == r.p0;
    add_check(res, "sum_rule_bitwise", bitwise, bitwise ? 0.0 : (r.sum - r.p0).cwiseAbs().maxCoeff(), 0.0,
              "P1 + P2 == P0");
    const double dev = std::abs(r.centroid / r.centroid_closed_form - 1.0);
    add_check(res, "centroid_matches_closed_form", dev <= 0.02, dev, 0.02, "relative deviation");
}

void scheme_joint(const JointWmBlock &b, std::uint64_t seed, CommandResult &res) {
    JointWmSpec spec;
    spec.tau = b.tau;
    spec.phi = b.phi;
    spec.epsilon = b.epsilon;
    spec.omega_det = b.omega_det;
    spec.spectrum = gaussian_spectrum(b.omega0, b.spread, b.points);
    spec.photons = b.photons;
    spec.trials = b.trials;
    spec.seed = seed;
    const JointWmResult r = joint_wm_scheme(spec);
    res.report["tau_mean"] = r.tau_mean;
    res.report["tau_se"] = r.tau_se;
    res.report["phi_mean"] = r.phi_mean;
    res.report["tau_limit"] = r.tau_limit;
    res.report["phi_limit"] = r.phi_limit;
    res.report["spread"] = r.spread;
    res.report["bias_factor_formula"] = r.bias_factor_formula;
    Table t{"joint_wm", {"omega", "p_plus", "p_minus"}, {}};
    for (Eigen::Index i = 0; i < r.omega.size(); ++i) {
        t.rows.push_back({r.omega(i), r.p_plus(i), r.p_minus(i)});
    }
    res.tables.push_back(std::move(t));
    const double z = r.tau_se > 0.0 ? std::abs(r.tau_mean - r.tau_limit) / r.tau_se : 0.0;
    add_check(res, "monte_carlo_matches_limit", z <= 4.0, z, 4.0, "|mean − limit| / SE");
}

void scheme_biased(const BiasedSpec &spec, CommandResult &res) {
    const BiasedResult r = biased_scheme(spec);
    res.report["scheme"] = report_json(r.report);
    res.report["shift"] = r.shift;
    res.report["slope"] = r.slope;
    res.report["slope_closed_form"] = r.slope_closed_form;
    res.report["p_f_grid"] = r.p_f_grid;
    res.report["p_f_closed_form"] = r.p_f_closed_form;
    res.report["p_f_approx"] = r.p_f_approx;
    if (r.tau_bound_standard) {
        res.report["tau_bound_standard"] = *r.tau_bound_standard;
        res.report["tau_bound_biased"] = *r.tau_bound_biased;
    }
    Table t{"spectrum", {"omega", "density"}, {}};
    for (Eigen::Index i = 0; i < r.omega.size(); ++i) {
        t.rows.push_back({r.omega(i), r.spectrum(i)});
    }
    res.tables.push_back(std::move(t));
    const double pdev = std::abs(r.p_f_grid / r.p_f_closed_form - 1.0);
    add_check(res, "p_f_matches_closed_form", pdev <= 0.01, pdev, 0.01, "relative deviation");
    const double sweet = biased_sweet_spot(spec.omega0, spec.epsilon);
    if (std::abs(spec.beta - sweet) <= 1e-12 * std::abs(sweet)) {
        const double sdev = std::abs(r.slope / r.slope_closed_form - 1.0);
        add_check(res, "slope_matches_closed_form", sdev <= 0.02, sdev, 0.02, "relative deviation at the sweet spot");
    }
}

void scheme_recycle(const RecycleSpec &spec, CommandResult &res) {
    const RecycleResult r = recycle_scheme(spec);
    res.report["detected_fraction"] = r.detected_fraction;
    res.report["snr_gain"] = r.snr_gain;
    if (r.cavity_gain) {
        res.report["cavity_gain"] = *r.cavity_gain;
        res.report["cavity_snr_gain"] = *r.cavity_snr_gain;
    }
    if (spec.loss == 0.0 && spec.rounds < 0) {
        const double dev = std::abs(r.snr_gain - 1.0 / std::sqrt(spec.p_f));
        add_check(res, "lossless_gain", dev <= 1e-9, dev, 1e-9, "|gain − 1/√p_f|");
    }
}

void scheme_phase(const PhaseSpaceBlock &b, CommandResult &res) {
    if (b.meter != "coherent" && b.meter != "quarter_variance_mixture") {
        fail(ErrorCode::ConfigError, "line 1: meter must be 'coherent' or 'quarter_variance_mixture'");
    }
    const FockMeter meter = b.meter == "coherent" ? FockMeter::coherent(std::sqrt(b.mean_photons))
                                                  : quarter_variance_mixture(b.mean_photons);
    const PhaseSpaceResult r = phase_space_scheme({b.g, b.epsilon}, meter);
    if (r.budget) {
        nlohmann::json bj = *r.budget;
        res.report["budget"] = ojson::parse(bj.dump());
        const double resid = std::abs(r.budget->residual()) / r.budget->q_jt;
        add_check(res, "budget_identity", resid <= 1e-4, resid, 1e-4, "|residual| / Q_jt");
    }
    res.report["weak_value"] = {r.weak_value.real(), r.weak_value.imag()};
    res.report["p_f"] = r.p_f;
    res.report["f_wva"] = r.f_wva;
    res.report["mean_shift"] = r.mean_shift;
    res.report["mean_shift_closed_form"] = r.mean_shift_closed_form;
    res.report["p_f_closed_form"] = r.p_f_closed_form;
    res.report["f_wva_closed_form"] = r.f_wva_closed_form;
    Table t{"photon_distribution", {"n", "probability"}, {}};
    for (Eigen::Index i = 0; i < r.photon_distribution.size(); ++i) {
        t.rows.push_back({static_cast<long long>(i), r.photon_distribution(i)});
    }
    res.tables.push_back(std::move(t));
    if (!b.sweep.empty()) {
        const ScalingFit fit = phase_space_scaling(b.sweep, b.epsilon, b.g);
        Table s{"heisenberg", {"n", "f_p"}, {}};
        for (std::size_t i = 0; i < fit.n.size(); ++i) {
            s.rows.push_back({fit.n[i], fit.f_p[i]});
        }
        res.tables.push_back(std::move(s));
        res.report["scaling_slope"] = fit.slope;
        res.report["scaling_intercept"] = fit.intercept;
        add_check(res, "heisenberg_slope", std::abs(fit.slope - 2.0) <= 0.05, fit.slope, 2.0,
                  "log-log slope of F_p vs N within 0.05 of 2");
    }
}

void scheme_entangled(const EntangledSpec &spec, CommandResult &res) {
    const EntangledResult r = entangled_scheme(spec);
    res.report["scheme"] = report_json(r.report);
    res.report["q_exact"] = r.q_exact;
    res.report["p_f"] = r.p_f;
    res.report["p_f_closed_form"] = r.p_f_closed_form;
    res.report["weak_value"] = {r.weak_value.real(), r.weak_value.imag()};
    res.report["weak_value_closed_form"] = r.weak_value_closed_form;
    res.report["sql_baseline"] = r.sql_baseline;
    Table t{"meter", {"sigma_z", "probability"}, {}};
    t.rows.push_back({1LL, r.meter_distribution(0)});
    t.rows.push_back({-1LL, r.meter_distribution(1)});
    res.tables.push_back(std::move(t));
    add_check(res, "q_exact_is_4n2", r.q_exact == 4 * spec.n * spec.n, static_cast<double>(r.q_exact),
              4.0 * static_cast<double>(spec.n) * static_cast<double>(spec.n), "Q = 4N²");
}

}  // namespace

CommandResult cmd_scheme(const ScenarioConfig &config) {
    CommandResult res;
    res.command = "scheme";
    res.report["type"] = scheme_type(config.scheme);
    std::visit(
        [&](const auto &b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, StandardSpec>) {
                scheme_standard(b, res);
            } else if constexpr (std::is_same_v<B, InverseSpec>) {
                scheme_inverse(b, res);
            } else if constexpr (std::is_same_v<B, AbwvaSpec>) {
                scheme_abwva(b, res);
            } else if constexpr (std::is_same_v<B, JointWmBlock>) {
                scheme_joint(b, config.experiment.seed, res);
            } else if constexpr (std::is_same_v<B, BiasedSpec>) {
                scheme_biased(b, res);
            } else if constexpr (std::is_same_v<B, RecycleSpec>) {
                scheme_recycle(b, res);
            } else if constexpr (std::is_same_v<B, PhaseSpaceBlock>) {
                scheme_phase(b, res);
            } else if constexpr (std::is_same_v<B, EntangledSpec>) {
                scheme_entangled(b, res);
            } else {
                fail(ErrorCode::ConfigError, "line 1: scheme type '" + scheme_type(config.scheme) +
                                                 "' belongs to another command");
            }
        },
        config.scheme);
    return res;
}

CommandResult cmd_estimate(const ScenarioConfig &config) {
    const auto &spec = block_as<StandardSpec>(config, "estimate");
    ExperimentPlan plan;
    plan.scheme = spec;
    plan.noise = config.noise;
    plan.nu = config.experiment.nu;
    plan.trials = config.experiment.trials;
    plan.seed = config.experiment.seed;
    plan.estimator = config.experiment.estimator;
    plan.grid_points = config.experiment.grid_points;
    plan.keep_samples = config.experiment.keep_samples;
    const EstimateReport r = run_experiment(plan);
    CommandResult res;
    res.command = "estimate";
    nlohmann::json rj = r;
    res.report["estimate"] = ojson::parse(rj.dump());
    res.report["estimator"] = to_string(plan.estimator);
    Table t{"estimates", {"trial", "estimate"}, {}};
    for (std::size_t i = 0; i < r.estimates.size(); ++i) {
        t.rows.push_back({static_cast<long long>(i), r.estimates[i]});
    }
    res.tables.push_back(std::move(t));
    if (plan.keep_samples) {
        Table s{"samples", {"trial", "index", "value"}, {}};
        for (std::size_t i = 0; i < r.samples.size(); ++i) {
            for (std::size_t k = 0; k < r.samples[i].size(); ++k) {
                s.rows.push_back({static_cast<long long>(i), static_cast<long long>(k), r.samples[i][k]});
            }
        }
        res.tables.push_back(std::move(s));
    }
    const double z = r.crb_ratio_se > 0.0 ? std::abs(r.crb_ratio - 1.0) / r.crb_ratio_se : 0.0;
    add_check(res, "crb_saturation", z <= 3.0, r.crb_ratio, 1.0, "|crb_ratio − 1| within 3 standard errors");
    const double zb = r.standard_error > 0.0 ? std::abs(r.mean_estimate - r.true_value) / r.standard_error : 0.0;
    add_check(res, "unbiased", zb <= 4.0, zb, 4.0, "|mean − g| / SE");
    return res;
}

CommandResult run_command(const std::string &command, const ScenarioConfig &config) {
    if (command == "shift") {
        return cmd_shift(config);
    }
    if (command == "budget") {
        return cmd_budget(config);
    }
    if (command == "noise") {
        return cmd_noise(config);
    }
    if (command == "scheme") {
        return cmd_scheme(config);
    }
    if (command == "estimate") {
        return cmd_estimate(config);
    }
    fail(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
    }
    out << content;
}

}  // namespace

int run(const RunOptions &options, std::ostream &out, std::ostream &err) {
    try {
        ScenarioConfig config = load_config(options.config_path);
        if (options.seed) {
            config.experiment.seed = *options.seed;
        }
        if (options.format) {
            if (*options.format != "csv" && *options.format != "json") {
                fail(ErrorCode::InvalidArgument, "--format must be csv or json");
            }
            config.output.format = *options.format;
        }
        if (options.out) {
            config.output.directory = *options.out;
        }
        CommandResult res = run_command(options.command, config);

        const ojson echo = to_json(config);
        ojson report = ojson::object();
        report["command"] = res.command;
        report["seed"] = config.experiment.seed;
        report["config"] = echo;
        report["config_hash"] = hex64(fnv1a(echo.dump()));
        report["results"] = res.report;
        report["content_hash"] = hex64(fnv1a(res.report.dump()));

        std::vector<std::string> requested;
        if (config.output.checks) {
            requested = *config.output.checks;
            for (const auto &name : requested) {
                const bool known = std::any_of(res.checks.begin(), res.checks.end(),
                                               [&](const Check &c) { return c.name == name; });
                if (!known) {
                    fail(ErrorCode::ConfigError, "line 1: command '" + res.command + "' has no check '" + name + "'");
                }
            }
        } else {
            for (const auto &c : res.checks) {
                requested.push_back(c.name);
            }
        }
        bool all_pass = true;
        ojson checks = ojson::array();
        for (const auto &c : res.checks) {
            const bool req = std::find(requested.begin(), requested.end(), c.name) != requested.end();
            all_pass = all_pass && (!req || c.pass);
            checks.push_back({{"name", c.name},
                              {"requested", req},
                              {"pass", c.pass},
                              {"value", c.value},
                              {"limit", c.limit},
                              {"detail", c.detail}});
        }
        report["checks"] = checks;
        report["all_pass"] = all_pass;

        const bool to_dir = !config.output.directory.empty();
        const bool csv = config.output.format == "csv" && to_dir;
        ojson files = ojson::array();
        if (csv) {
            std::filesystem::create_directories(config.output.directory);
            for (const auto &t : res.tables) {
                const std::string body = t.to_csv();
                const std::string name = t.name + ".csv";
                write_file(std::filesystem::path(config.output.directory) / name, body);
                files.push_back({{"name", name}, {"fnv1a", hex64(fnv1a(body))}, {"rows", t.rows.size()}});
            }
            report["files"] = files;
        } else {
            ojson tables = ojson::array();
            for (const auto &t : res.tables) {
                tables.push_back(t.to_json());
            }
            report["tables"] = tables;
        }
        const std::string text = report.dump(2) + "\n";
        if (to_dir) {
            std::filesystem::create_directories(config.output.directory);
            write_file(std::filesystem::path(config.output.directory) / "report.json", text);
            ojson summary = {{"command", res.command},
                             {"seed", config.experiment.seed},
                             {"config_hash", report["config_hash"]},
                             {"all_pass", all_pass},
                             {"report", (std::filesystem::path(config.output.directory) / "report.json").string()}};
            out << summary.dump() << "\n";
        } else {
            out << text;
        }
        return all_pass ? 0 : 1;
    } catch (const Error &e) {
        ojson j = {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}};
        err << j.dump() << "\n";
        return 2;
    } catch (const std::exception &e) {
        ojson j = {{"error", {{"code", "Internal"}, {"message", e.what()}}}};
        err << j.dump() << "\n";
        return 2;
    }
}

}  // namespace wvalab::cli
