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

#include <functional>
#include <limits>
#include <optional>

#include "json.hpp"

#include "wvalab/coupling.hpp"

namespace wvalab {

/// Outcome probabilities as a function of g. Grid outcomes carry masses (density times bin width).
struct ParamDistribution {
    std::function<Eigen::VectorXd(double)> masses;
    std::function<Eigen::VectorXd(double)> derivative;  // optional analytic ∂P/∂g
    Eigen::VectorXd outcomes;                           // outcome values, needed by snr()
    double g_min = -std::numeric_limits<double>::infinity();
    double g_max = std::numeric_limits<double>::infinity();
};

ParamDistribution binary_family(std::function<double(double)> p_success,
                                std::function<double(double)> dp_success = nullptr);
/// Gaussian location family N(g, σ²) binned on x0 + i·dx.
ParamDistribution gaussian_location_family(double sigma, double x0, double dx, int points);

enum class FisherMethod { Analytic, CentralDifference };

struct FisherReport {
    double fi;
    FisherMethod method;
    double step;
};

double default_step(double g);

/// h = 0 selects default_step(g).
FisherReport classical_fisher(const ParamDistribution &dist, double g, double h = 0.0);

/// 4[<∂ψ|∂ψ> − |<ψ|∂ψ>|²] with inner products weighted by `measure`.
double qfi_pure(const CVector &psi, const CVector &dpsi, double measure = 1.0);
double qfi_pure(const std::function<CVector(double)> &family, double g, double h = 0.0, double measure = 1.0);
double qfi_pure(const std::function<GridMeter(double)> &family, double g, double h = 0.0);

double qfi_mixed(const CMatrix &rho, const CMatrix &drho);
double qfi_mixed(const std::function<CMatrix(double)> &family, double g, double h = 0.0);

double qfi_joint(const SystemState &pre, const MeterState &meter, const CouplingConfig &cfg);

/// Probability, its g-derivative, and p·Q of the pure state left after a projector acts on the joint state.
struct ArmInformation {
    double p;
    double dp;
    double pq;
};

/// `projector` acts on the system; the meter is untouched. Pure meters only.
ArmInformation arm_information(const JointState &joint, const CMatrix &projector);

struct PostSelectedQfi {
    double p_f;
    double q_f;
};

PostSelectedQfi qfi_postselected(const SystemState &pre, const SystemState &post, const CouplingConfig &cfg,
                                 const MeterState &meter, const EvolveOptions &options = {});

struct InfoBudget {
    double q_jt;
    double pf_qf;
    double pr_qr;
    double f_p;
    double p_f;

    double residual() const {
        return q_jt - (pf_qf + pr_qr + f_p);
    }
};

InfoBudget info_budget(const SystemState &pre, const SystemState &post, const CouplingConfig &cfg,
                       const MeterState &meter, const EvolveOptions &options = {});

double snr(const ParamDistribution &dist, double g, int nu, double x0);

struct ScalingBounds {
    double sql;
    double hl;
};

ScalingBounds scaling_bounds(long long n, double h_min, double h_max);

/// Phase variance 1/[8(n̄² + n̄)] of a two-mode squeezed vacuum probe.
double tmsv_phase_variance(double mean_photons);

const char *to_string(FisherMethod method);
void to_json(nlohmann::json &j, const InfoBudget &b);
void to_json(nlohmann::json &j, const FisherReport &r);

}  // namespace wvalab
