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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "wvalab/estimate.hpp"
#include "wvalab/noise.hpp"
#include "wvalab/schemes.hpp"

namespace wvalab::cli {

// Scenario blocks that exist only at the command layer.

struct TrappedIonSweep {
    std::vector<double> gammas{0.1, 1.0, 3.0};
    int theta_points = 89;
    double sigma = 1.0;
    bool simulate = true;
};

struct BudgetSweep {
    double g_over_2sigma = 0.1;
    double sigma = 1.0;
    int theta_points = 60;
    int pf_points = 16;
};

struct NoiseTable {
    double p_f = 0.01;
    double weak_value = 0.0;  // 0 selects the trade-off p_f w² = 1
    std::vector<double> tau_c;  // empty: the noise block's own tau_c
    double tolerance = 0.02;
};

struct JointWmBlock {
    double tau = 0.002;
    double phi = 1.5707963267948966;
    double epsilon = 0.0;
    double omega_det = 0.0;
    double omega0 = 10.0;
    double spread = 1.0;
    int points = 801;
    long photons = 10000;
    int trials = 100;
};

struct PhaseSpaceBlock {
    double g = 1e-6;
    double epsilon = 0.1;
    std::string meter = "coherent";  // or "quarter_variance_mixture"
    double mean_photons = 100.0;
    std::vector<double> sweep;  // mean photon numbers for the F_p scaling fit
};

using SchemeBlock = std::variant<TrappedIonSweep, BudgetSweep, NoiseTable, StandardSpec, InverseSpec, AbwvaSpec,
                                 JointWmBlock, BiasedSpec, RecycleSpec, PhaseSpaceBlock, EntangledSpec>;

std::string scheme_type(const SchemeBlock &block);

struct ExperimentBlock {
    int nu = 10000;
    int trials = 200;
    std::uint64_t seed = 2024;
    Estimator estimator = Estimator::AMR;
    int grid_points = 81;
    bool keep_samples = false;
};

struct OutputBlock {
    std::string directory;
    std::string format = "csv";
    std::optional<std::vector<std::string>> checks;  // unset: every check the command defines
};

struct ScenarioConfig {
    SchemeBlock scheme;
    std::optional<CorrelatedNoiseModel> noise;
    ExperimentBlock experiment;
    OutputBlock output;
};

/// Throws ConfigError("line N: ...") for syntax errors, unknown keys, and bad values.
ScenarioConfig parse_config(const std::string &text);
ScenarioConfig load_config(const std::string &path);

nlohmann::ordered_json to_json(const ScenarioConfig &config);
bool operator==(const ScenarioConfig &a, const ScenarioConfig &b);

std::uint64_t fnv1a(std::string_view bytes);

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
};

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct CommandResult {
    std::string command;
    nlohmann::ordered_json report;
    std::vector<Table> tables;
    std::vector<Check> checks;
};

CommandResult cmd_shift(const ScenarioConfig &config);
CommandResult cmd_budget(const ScenarioConfig &config);
CommandResult cmd_noise(const ScenarioConfig &config);
CommandResult cmd_scheme(const ScenarioConfig &config);
CommandResult cmd_estimate(const ScenarioConfig &config);

CommandResult run_command(const std::string &command, const ScenarioConfig &config);

struct RunOptions {
    std::string command;
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> format;
};

/// Full invocation: load, override, run, write. Returns the process exit code
/// (0 all requested checks pass, 1 a check failed, 2 error) and prints error JSON to `err`.
int run(const RunOptions &options, std::ostream &out, std::ostream &err);

}  // namespace wvalab::cli
