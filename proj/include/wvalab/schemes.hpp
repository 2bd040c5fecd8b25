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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wvalab/coupling.hpp"
#include "wvalab/infometrics.hpp"
#include "wvalab/meter.hpp"
#include "wvalab/qsys.hpp"

namespace wvalab {

/// Common summary. `fisher` is per input trial (post-selection losses included); `q_bound` is the QFI
/// about the same parameter that no readout can exceed.
struct SchemeReport {
    double amplification = 0.0;
    double p_f = 0.0;
    double fisher = 0.0;
    double q_bound = 0.0;
    double snr_per_root_nu = 0.0;
    RegimeLabel regime = RegimeLabel::StandardWVA;
    std::vector<std::string> warnings;
};

enum class WeakValueKind { Real, Imaginary };

const char *to_string(WeakValueKind kind);

// Standard WVA: pre (|0⟩+|1⟩)/√2, A = σ_z, momentum-kick coupling, post bloch(−π/2 + ε, 0) or bloch(−π/2, φ).

struct StandardSpec {
    WeakValueKind kind = WeakValueKind::Real;
    double g = 0.01;
    double angle = 0.1;  // ε for the real scheme, φ for the imaginary one
    double sigma = 1.0;
    int grid_points = 4096;
};

struct StandardResult {
    SchemeReport report;
    cplx weak_value;
    Shifts grid_shifts;
    Shifts exact_shifts;
    double aav_margin;
    /// Position marginal for the real scheme, momentum marginal for the imaginary one.
    SampledDistribution outcome;
};

StandardResult standard_scheme(const StandardSpec &spec);

/// Conditioned readout at coupling g on the grid fixed by `spec` (its own g sets the span); unit mass.
SampledDistribution standard_readout(const StandardSpec &spec, double g);

// Inverse WVA: post cos(π/4 − θ/2)|0⟩ − sin(π/4 − θ/2)e^{iφ}|1⟩ with |⟨f|i⟩| < g/σ < 1.

struct InverseSpec {
    WeakValueKind kind = WeakValueKind::Real;
    double g = 0.05;
    double angle = 0.0;  // θ_I or φ_I
    double sigma = 1.0;
    int grid_points = 4096;
};

struct InverseResult {
    SchemeReport report;   // fisher and q_bound refer to the system angle
    double overlap;        // |⟨f|i⟩|
    double validity_ratio; // |⟨f|i⟩| / (g/σ)
    Shifts grid_shifts;
    double q_closed_form;  // 2θσ²/g
    double p_closed_form;  // −φ/g
    /// "Q" or "P": the grid quadrature whose mean is nearer −φ/g (imaginary scheme), "Q" otherwise.
    std::string matching_quadrature;
    double p_f_closed_form;
    double angle_estimate; // angle inferred from the grid shift
    SampledDistribution outcome;
};

InverseResult inverse_scheme(const InverseSpec &spec);

// Almost-balanced WVA: post (|0⟩ ± i e^{−iε}|1⟩)/√2 so that P_{1,2} = [1 ± sin(ε + 2gp)]P0/2.

struct AbwvaSpec {
    double g = 1e-4;
    double epsilon = 0.05;
    double sigma = 1.0;
    int grid_points = 4096;
};

struct AbwvaResult {
    SchemeReport report;
    Eigen::VectorXd p;  // momentum grid
    Eigen::VectorXd p0;
    Eigen::VectorXd p1;
    Eigen::VectorXd p2;
    Eigen::VectorXd sum;
    Eigen::VectorXd difference;  // P1 − P2
    double dp;
    double centroid;             // of the difference signal
    double centroid_closed_form; // g cot ε/(2σ²)
    double signal_abwva;         // ∫(P1 − P2)
    double signal_standard;      // p_f of standard real WVA at the same ε
};

AbwvaResult abwva_scheme(const AbwvaSpec &spec);

// Joint weak measurement of a time delay with two detectors q = ±1.

struct JointWmSpec {
    double tau = 0.01;
    double phi = 1.5707963267948966;
    double epsilon = 0.0;   // alignment fluctuation
    double omega_det = 0.0; // detection noise Ω
    SampledDistribution spectrum;
    long photons = 10000;   // per trial
    int trials = 100;
    std::uint64_t seed = 2024;
};

/// Normalized Gaussian P0(ω) with standard deviation `spread`, sampled on ±8 spread.
SampledDistribution gaussian_spectrum(double omega0, double spread, int points = 2001);

struct JointWmResult {
    Eigen::VectorXd omega;
    Eigen::VectorXd p_plus;   // P_{+1}(ω)
    Eigen::VectorXd p_minus;  // P_{−1}(ω)
    double tau_mean;          // Monte Carlo mean of the contrast-one MLE
    double tau_se;
    double phi_mean;
    double tau_limit;         // large-sample limit of the same MLE (expected log-likelihood)
    double phi_limit;
    double spread;            // standard deviation of P0
    double bias_factor_formula; // ½(ε/sinφ)² + ½(Ω/Δω)² with Δω the spectrum standard deviation
};

JointWmResult joint_wm_scheme(const JointWmSpec &spec);

// Biased WVA.

struct BiasedSpec {
    double tau = 0.0;
    double beta = 0.0;
    double epsilon = 0.1;
    double omega0 = 10.0;
    double delta = 1.0;  // |f(ω)|² ∝ exp[−(ω − ω0)²/δ²]
    double resolution = 0.0; // ΔΩ, 0 skips the resolution bounds
    int grid_points = 4001;
};

/// Root of ω0β − ε = 0.
double biased_sweet_spot(double omega0, double epsilon);

struct BiasedResult {
    SchemeReport report;
    Eigen::VectorXd omega;
    Eigen::VectorXd spectrum;     // S(ω) on the grid
    double shift;                 // Δω
    double slope;                 // dΔω/dτ on the grid
    double slope_closed_form;     // 2ω0²/ε
    double p_f_grid;
    double p_f_closed_form;       // ½{1 − e^{−δ²(β+τ)²} cos[2(ω0(β+τ) − ε)]}
    double p_f_approx;            // δ²ε²/(2ω0²)
    std::optional<double> tau_bound_standard; // |ε|ΔΩ/δ²
    std::optional<double> tau_bound_biased;   // |ε|ΔΩ/(2ω0²)
};

BiasedResult biased_scheme(const BiasedSpec &spec);

// Power recycling.

struct RecycleSpec {
    double p_f = 0.03;
    double loss = 0.0;     // per round
    long rounds = -1;      // −1 sums the infinite series
    double mirror_r = 0.0; // cavity mode when > 0
};

struct RecycleResult {
    double detected_fraction; // Σ p_f N_j / N
    double snr_gain;          // √(detected/(p_f N))
    std::optional<double> cavity_gain;     // G
    std::optional<double> cavity_snr_gain; // √G
};

RecycleResult recycle_scheme(const RecycleSpec &spec);

// Phase-space WVA: U = exp(−ig C n̂) with C = |1⟩⟨1|, pre (|0⟩+|1⟩)/√2, post (|1⟩ − e^{−iε}|0⟩)/√2.

struct PhaseSpaceSpec {
    double g = 1e-6;
    double epsilon = 0.1;
};

struct PhaseSpaceResult {
    std::optional<InfoBudget> budget;    // pure meters only
    cplx weak_value;
    double p_f;
    double f_wva;                        // p_f × FI of the conditioned photon count
    Eigen::VectorXd photon_distribution; // conditioned meter
    double mean_shift;                   // ⟨n⟩_f − ⟨n⟩
    double mean_shift_closed_form;       // 2g Im⟨C⟩_w Var(n)
    double p_f_closed_form;              // [1 − cos(gN + ε)]/2
    double f_wva_closed_form;            // 4 p_f Im⟨C⟩_w² Var(n)
};

PhaseSpaceResult phase_space_scheme(const PhaseSpaceSpec &spec, const FockMeter &meter);

struct ScalingFit {
    std::vector<double> n;
    std::vector<double> f_p;
    double slope;
    double intercept;
};

/// F_p for coherent meters of the given mean photon numbers and a least-squares slope in log-log.
ScalingFit phase_space_scaling(const std::vector<double> &mean_photons, double epsilon, double g);

// Entanglement-assisted and iterative WVA in the two-level subspace {|0⟩^⊗N, |1⟩^⊗N}.

enum class EntangledPost { MaxProb, MaxWeakValue };
enum class EntangledVariant { Entangled, Iterative };

struct EntangledSpec {
    double phi = 1e-6;
    double epsilon = 0.01;
    long long n = 1;
    EntangledPost post = EntangledPost::MaxProb;
    EntangledVariant variant = EntangledVariant::Entangled;
};

struct EntangledResult {
    SchemeReport report;
    long long q_exact;        // 4N²
    double p_f;               // sin²(Nε) or sin²(√N ε)
    double p_f_closed_form;   // N²ε² or Nε²
    cplx weak_value;
    double weak_value_closed_form; // 1/ε or √N/ε
    Eigen::Vector2d meter_distribution; // σ_z = +1, −1 on the conditioned meter qubit
    double sql_baseline;      // 4N from N independent single-particle trials
};

EntangledResult entangled_scheme(const EntangledSpec &spec);

void to_json(nlohmann::json &j, const SchemeReport &r);

}  // namespace wvalab
