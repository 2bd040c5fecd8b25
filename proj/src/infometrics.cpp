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

#include "wvalab/infometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>

#include <Eigen/Eigenvalues>

#include "wvalab/error.hpp"

namespace wvalab {

namespace {

constexpr double kProbabilityFloor = 1e-14;
constexpr double kSldCutoff = 1e-12;

// Central difference with one Richardson refinement.
template <typename F>
auto richardson(const F &f, double g, double h) {
    using V = std::decay_t<decltype(f(g))>;
    V coarse = (f(g + h) - f(g - h)) / (2.0 * h);
    V fine = (f(g + 0.5 * h) - f(g - 0.5 * h)) / h;
    return V((4.0 * fine - coarse) / 3.0);
}

double standard_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

ParamDistribution binary_family(std::function<double(double)> p_success, std::function<double(double)> dp_success) {
    ParamDistribution d;
    d.masses = [p_success](double g) {
        Eigen::VectorXd m(2);
        double p = p_success(g);
        m << p, 1.0 - p;
        return m;
    };
    if (dp_success) {
        d.derivative = [dp_success](double g) {
            Eigen::VectorXd m(2);
            double dp = dp_success(g);
            m << dp, -dp;
            return m;
        };
    }
    d.outcomes = Eigen::Vector2d(1.0, 0.0);
    return d;
}

ParamDistribution gaussian_location_family(double sigma, double x0, double dx, int points) {
    if (!(sigma > 0.0) || !(dx > 0.0) || points < 2) {
        fail(ErrorCode::InvalidArgument, "Gaussian family needs sigma > 0, dx > 0 and at least two bins");
    }
    ParamDistribution d;
    d.outcomes = Eigen::VectorXd::LinSpaced(points, x0, x0 + (points - 1) * dx);
    d.masses = [=](double g) {
        Eigen::VectorXd m(points);
        for (int i = 0; i < points; ++i) {
            double x = x0 + i * dx;
            m(i) = standard_normal_cdf((x + 0.5 * dx - g) / sigma) - standard_normal_cdf((x - 0.5 * dx - g) / sigma);
        }
        return m;
    };
    d.derivative = [=](double g) {
        Eigen::VectorXd m(points);
        for (int i = 0; i < points; ++i) {
            double x = x0 + i * dx;
            m(i) = (standard_normal_pdf((x - 0.5 * dx - g) / sigma) - standard_normal_pdf((x + 0.5 * dx - g) / sigma)) /
                   sigma;
        }
        return m;
    };
    return d;
}

double default_step(double g) {
    return std::max(1e-6, 1e-4 * std::abs(g));
}

FisherReport classical_fisher(const ParamDistribution &dist, double g, double h) {
    Eigen::VectorXd p = dist.masses(g);
    if (std::abs(p.sum() - 1.0) > 1e-9 || p.minCoeff() < -1e-12) {
        fail(ErrorCode::InvalidState, "distribution is not normalized at the probe point");
    }
    FisherReport report{0.0, FisherMethod::Analytic, 0.0};
    Eigen::VectorXd dp;
    if (dist.derivative) {
        dp = dist.derivative(g);
    } else {
        if (h <= 0.0) {
            h = default_step(g);
        }
        if (g - h < dist.g_min || g + h > dist.g_max) {
            fail(ErrorCode::StepTooLarge, "difference probe leaves the valid parameter domain");
        }
        dp = richardson(dist.masses, g, h);
        report.method = FisherMethod::CentralDifference;
        report.step = h;
    }
    double fi = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) >= kProbabilityFloor) {
            fi += dp(i) * dp(i) / p(i);
        }
    }
    report.fi = std::max(0.0, fi);
    return report;
}

double qfi_pure(const CVector &psi, const CVector &dpsi, double measure) {
    double a = dpsi.squaredNorm() * measure;
    cplx b = psi.dot(dpsi) * measure;
    return std::max(0.0, 4.0 * (a - std::norm(b)));
}

double qfi_pure(const std::function<CVector(double)> &family, double g, double h, double measure) {
    if (h <= 0.0) {
        h = default_step(g);
    }
    CVector d = richardson(family, g, h);
    return qfi_pure(family(g), d, measure);
}

double qfi_pure(const std::function<GridMeter(double)> &family, double g, double h) {
    auto amps = [&family](double x) { return family(x).amplitudes(); };
    return qfi_pure(amps, g, h, family(g).dq());
}

double qfi_mixed(const CMatrix &rho, const CMatrix &drho) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
    const auto &lam = es.eigenvalues();
    const CMatrix &v = es.eigenvectors();
    CMatrix d = v.adjoint() * drho * v;
    double q = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
        for (Eigen::Index k = 0; k < lam.size(); ++k) {
            double s = lam(j) + lam(k);
            if (s > kSldCutoff) {
                // Tr(L ρ L) with L_jk = 2 ∂ρ_jk / (λ_j + λ_k), symmetrized over (j, k).
                q += 2.0 * std::norm(d(j, k)) / s;
            }
        }
    }
    return std::max(0.0, q);
}

double qfi_mixed(const std::function<CMatrix(double)> &family, double g, double h) {
    if (h <= 0.0) {
        h = default_step(g);
    }
    CMatrix d = richardson(family, g, h);
    return qfi_mixed(family(g), d);
}

double qfi_joint(const SystemState &pre, const MeterState &meter, const CouplingConfig &cfg) {
    double mean_g = 0.0;
    double var_g = 0.0;
    if (cfg.generator == Generator::MomentumKick) {
        if (const auto *gm = std::get_if<GaussianMeter>(&meter)) {
            mean_g = gm->mean_p;
            var_g = gm->variance_p();
        } else if (const auto *grid = std::get_if<GridMeter>(&meter)) {
            mean_g = grid->mean_p();
            var_g = grid->variance_p();
        } else {
            fail(ErrorCode::IncompatibleMeter, "a momentum kick needs a Gaussian or grid meter");
        }
    } else {
        const auto *fock = std::get_if<FockMeter>(&meter);
        if (fock == nullptr) {
            fail(ErrorCode::IncompatibleMeter, "a photon-number phase needs a Fock meter");
        }
        if (!fock->is_pure()) {
            fail(ErrorCode::UnsupportedCombination, "joint QFI of a mixed Fock meter is not available in closed form");
        }
        auto m = fock_moments(*fock);
        mean_g = m.mean;
        var_g = m.variance;
    }
    CMatrix a2 = cfg.A.power(2);
    double mean_a2 = pre.amplitudes().dot(a2 * pre.amplitudes()).real();
    return 4.0 * (mean_a2 * var_g + variance(pre, cfg.A) * mean_g * mean_g);
}

ArmInformation arm_information(const JointState &joint, const CMatrix &projector) {
    if (joint.components.size() != 1) {
        fail(ErrorCode::UnsupportedCombination, "arm information needs a pure meter");
    }
    const auto &br = joint.components.front().branches;
    const auto k = static_cast<Eigen::Index>(br.size());
    const double w = joint.measure();

    std::vector<CVector> gm(br.size());
    for (std::size_t i = 0; i < br.size(); ++i) {
        if (joint.kind == MeterKind::Grid) {
            gm[i] = apply_momentum_function(joint.q0, joint.dq, br[i].meter, [](double p) { return cplx(p); });
        } else {
            gm[i] = br[i].meter;
            for (Eigen::Index n = 0; n < gm[i].size(); ++n) {
                gm[i](n) *= static_cast<double>(n);
            }
        }
    }
    std::vector<CVector> c(br.size());
    for (std::size_t i = 0; i < br.size(); ++i) {
        c[i] = projector * br[i].system;
    }
    cplx p = 0.0, vdv = 0.0, dvdv = 0.0;
    for (Eigen::Index l = 0; l < k; ++l) {
        for (Eigen::Index m = 0; m < k; ++m) {
            const auto lu = static_cast<std::size_t>(l);
            const auto mu = static_cast<std::size_t>(m);
            cplx s = c[lu].dot(c[mu]);
            if (s == cplx(0.0)) {
                continue;
            }
            const double al = br[lu].eigenvalue, am = br[mu].eigenvalue;
            p += s * br[lu].meter.dot(br[mu].meter) * w;
            vdv += s * cplx(0.0, -am) * br[lu].meter.dot(gm[mu]) * w;
            dvdv += s * al * am * gm[lu].dot(gm[mu]) * w;
        }
    }
    ArmInformation out{p.real(), 2.0 * vdv.real(), 0.0};
    if (out.p >= kProbabilityFloor) {
        out.pq = 4.0 * dvdv.real() - out.dp * out.dp / out.p - 4.0 * vdv.imag() * vdv.imag() / out.p;
        out.pq = std::max(0.0, out.pq);
    }
    return out;
}

PostSelectedQfi qfi_postselected(const SystemState &pre, const SystemState &post, const CouplingConfig &cfg,
                                 const MeterState &meter, const EvolveOptions &options) {
    auto joint = evolve_joint(pre, meter, cfg, options);
    CMatrix pi = post.amplitudes() * post.amplitudes().adjoint();
    auto arm = arm_information(joint, pi);
    if (arm.p <= 1e-12) {
        fail(ErrorCode::EmptyPostselection, "post-selection probability is below 1e-12");
    }
    return PostSelectedQfi{arm.p, arm.pq / arm.p};
}

InfoBudget info_budget(const SystemState &pre, const SystemState &post, const CouplingConfig &cfg,
                       const MeterState &meter, const EvolveOptions &options) {
    auto joint = evolve_joint(pre, meter, cfg, options);
    CMatrix pi = post.amplitudes() * post.amplitudes().adjoint();
    CMatrix rest = CMatrix::Identity(pi.rows(), pi.cols()) - pi;
    auto f = arm_information(joint, pi);
    auto r = arm_information(joint, rest);
    InfoBudget b{qfi_joint(pre, meter, cfg), f.pq, r.pq, 0.0, f.p};
    for (const auto &arm : {f, r}) {
        if (arm.p >= kProbabilityFloor) {
            b.f_p += arm.dp * arm.dp / arm.p;
        }
    }
    return b;
}

double snr(const ParamDistribution &dist, double g, int nu, double x0) {
    if (nu < 1) {
        fail(ErrorCode::InvalidArgument, "number of repetitions must be >= 1");
    }
    if (dist.outcomes.size() == 0) {
        fail(ErrorCode::InvalidArgument, "distribution carries no outcome values");
    }
    Eigen::VectorXd p = dist.masses(g);
    double total = p.sum();
    double mean = p.dot(dist.outcomes) / total;
    double var = p.dot((dist.outcomes.array() - mean).square().matrix()) / total;
    if (!(var > 0.0)) {
        fail(ErrorCode::ZeroVariance, "outcome variance vanishes");
    }
    return std::sqrt(static_cast<double>(nu)) * std::abs(mean - x0) / std::sqrt(var);
}

ScalingBounds scaling_bounds(long long n, double h_min, double h_max) {
    if (n < 1 || !(h_max > h_min)) {
        fail(ErrorCode::InvalidArgument, "scaling bounds need N >= 1 and h_max > h_min");
    }
    const double spread2 = (h_max - h_min) * (h_max - h_min);
    const double nn = static_cast<double>(n);
    return ScalingBounds{nn * spread2, nn * nn * spread2};
}

double tmsv_phase_variance(double mean_photons) {
    if (!(mean_photons > 0.0)) {
        fail(ErrorCode::InvalidArgument, "mean photon number must be positive");
    }
    return 1.0 / (8.0 * (mean_photons * mean_photons + mean_photons));
}

const char *to_string(FisherMethod method) {
    return method == FisherMethod::Analytic ? "Analytic" : "CentralDifference";
}

void to_json(nlohmann::json &j, const InfoBudget &b) {
    j = nlohmann::json{{"q_jt", b.q_jt}, {"pf_qf", b.pf_qf}, {"pr_qr", b.pr_qr}, {"f_p", b.f_p}, {"p_f", b.p_f}};
}

void to_json(nlohmann::json &j, const FisherReport &r) {
    j = nlohmann::json{{"fi", r.fi}, {"method", to_string(r.method)}, {"step", r.step}};
}

}  // namespace wvalab
