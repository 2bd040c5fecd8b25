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

#include "wvalab/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "wvalab/error.hpp"

namespace wvalab {

namespace {

constexpr double kPi = std::numbers::pi;

SampledDistribution momentum_marginal(const GridMeter &m, int pad) {
    MomentumGrid mg = to_momentum(m, pad);
    SampledDistribution d;
    d.x0 = mg.p0;
    d.dx = mg.dp;
    d.values = mg.amplitudes.cwiseAbs2();
    return d;
}

Eigen::VectorXd masses_of(const SampledDistribution &d) {
    Eigen::VectorXd m = d.values * d.dx;
    return m / m.sum();
}

const GridMeter &success_grid(const PostSelectedMeter &ps) {
    if (ps.empty) {
        fail(ErrorCode::EmptyPostselection, "post-selection never succeeds");
    }
    return std::get<GridMeter>(*ps.success_meter);
}

/// Reduced system density of a single-component joint state.
CMatrix reduced_system(const JointState &joint) {
    const Eigen::Index d = joint.system_dim();
    CMatrix rho = CMatrix::Zero(d, d);
    for (const auto &comp : joint.components) {
        for (const auto &a : comp.branches) {
            for (const auto &b : comp.branches) {
                cplx ov = b.meter.dot(a.meter) * joint.measure();
                rho += comp.weight * ov * (a.system * b.system.adjoint());
            }
        }
    }
    return rho;
}

double generator_qfi(const CMatrix &rho, const CMatrix &G) {
    cplx m1 = (rho * G).trace();
    cplx m2 = (rho * G * G).trace();
    return 4.0 * (m2.real() - m1.real() * m1.real());
}

std::string format_margin(double m) {
    std::ostringstream os;
    os << "RegimeViolation: AAV margin " << m << " >= 1";
    return os.str();
}

void require_positive(double v, const char *name) {
    if (!(v > 0.0)) {
        fail(ErrorCode::InvalidArgument, std::string(name) + " must be positive");
    }
}

}  // namespace

const char *to_string(WeakValueKind kind) {
    return kind == WeakValueKind::Real ? "real" : "imaginary";
}

SampledDistribution standard_readout(const StandardSpec &spec, double g) {
    require_positive(spec.sigma, "sigma");
    const SystemState pre = bloch_state(kPi / 2, 0.0);
    const SystemState post = spec.kind == WeakValueKind::Real ? bloch_state(-kPi / 2 + spec.angle, 0.0)
                                                               : bloch_state(-kPi / 2, spec.angle);
    EvolveOptions opts;
    opts.grid_points = spec.grid_points;
    opts.span = 8.0 * (spec.sigma + std::abs(spec.g));
    CouplingConfig cfg{g, Generator::MomentumKick, Observable::pauli_z()};
    PostSelectedMeter ps = postselect(evolve_joint(pre, GaussianMeter(spec.sigma), cfg, opts), post);
    const GridMeter &m = success_grid(ps);
    SampledDistribution d = spec.kind == WeakValueKind::Real ? m.position_distribution() : momentum_marginal(m, 8);
    d.values /= d.mass();
    return d;
}

StandardResult standard_scheme(const StandardSpec &spec) {
    require_positive(spec.sigma, "sigma");
    const SystemState pre = bloch_state(kPi / 2, 0.0);
    const SystemState post = spec.kind == WeakValueKind::Real ? bloch_state(-kPi / 2 + spec.angle, 0.0)
                                                               : bloch_state(-kPi / 2, spec.angle);
    const Observable A = Observable::pauli_z();
    const GaussianMeter meter(spec.sigma);
    EvolveOptions opts;
    opts.grid_points = spec.grid_points;
    opts.span = 8.0 * (spec.sigma + std::abs(spec.g));
    const int pad = 8;

    auto readout = [&](double g) {
        CouplingConfig cfg{g, Generator::MomentumKick, A};
        PostSelectedMeter ps = postselect(evolve_joint(pre, meter, cfg, opts), post);
        const GridMeter &m = success_grid(ps);
        return std::pair{spec.kind == WeakValueKind::Real ? m.position_distribution() : momentum_marginal(m, pad),
                         ps};
    };

    auto [outcome, ps] = readout(spec.g);
    const GridMeter &m = success_grid(ps);
    StandardResult res{};
    res.weak_value = weak_value(pre, post, A);
    res.grid_shifts = {m.mean_q(), m.mean_p()};
    res.exact_shifts = exact_shifts(res.weak_value, spec.g, spec.sigma);
    res.aav_margin = aav_condition_margin(pre, post, A, spec.g, spec.sigma, 10);
    res.outcome = outcome;

    ParamDistribution fam;
    fam.masses = [&](double g) { return masses_of(readout(g).first); };
    const double f_f = classical_fisher(fam, spec.g).fi;

    SchemeReport &r = res.report;
    r.p_f = ps.p_f;
    r.fisher = ps.p_f * f_f;
    r.q_bound = qfi_joint(pre, meter, CouplingConfig{spec.g, Generator::MomentumKick, A});
    r.snr_per_root_nu = std::abs(spec.g) * std::sqrt(r.fisher);
    if (spec.g != 0.0) {
        r.amplification = std::abs(spec.kind == WeakValueKind::Real
                                       ? res.grid_shifts.q / spec.g
                                       : 2.0 * spec.sigma * spec.sigma * res.grid_shifts.p / spec.g);
    } else {
        r.amplification = std::abs(spec.kind == WeakValueKind::Real ? res.weak_value.real() : res.weak_value.imag());
    }
    r.regime = spec.g != 0.0 ? classify_regime(std::abs(spec.g), spec.sigma, res.weak_value).label
                             : RegimeLabel::StandardWVA;
    if (res.aav_margin >= 1.0) {
        r.warnings.push_back(format_margin(res.aav_margin));
    }
    return res;
}

InverseResult inverse_scheme(const InverseSpec &spec) {
    require_positive(spec.sigma, "sigma");
    require_positive(spec.g, "g");
    const bool real = spec.kind == WeakValueKind::Real;
    auto post_of = [real](double angle) {
        const double theta = real ? angle : 0.0;
        const double phi = real ? 0.0 : angle;
        CVector v(2);
        v << std::cos(kPi / 4 - theta / 2), -std::sin(kPi / 4 - theta / 2) * std::polar(1.0, phi);
        return SystemState(v);
    };
    const SystemState pre = bloch_state(kPi / 2, 0.0);
    const Observable A = Observable::pauli_z();
    InverseResult res{};
    res.overlap = std::abs(overlap(post_of(spec.angle), pre));
    const double ratio = spec.g / spec.sigma;
    res.validity_ratio = res.overlap / ratio;
    if (!(res.overlap < ratio) || !(ratio < 1.0)) {
        fail(ErrorCode::ValidityViolation, "inverse WVA needs |<f|i>| < g/sigma < 1");
    }

    EvolveOptions opts;
    opts.grid_points = spec.grid_points;
    opts.span = 8.0 * (spec.sigma + spec.g);
    const CouplingConfig cfg{spec.g, Generator::MomentumKick, A};
    const JointState joint = evolve_joint(pre, GaussianMeter(spec.sigma), cfg, opts);
    const int pad = 8;
    auto readout = [&](double angle) {
        PostSelectedMeter ps = postselect(joint, post_of(angle));
        const GridMeter &m = success_grid(ps);
        return std::pair{real ? m.position_distribution() : momentum_marginal(m, pad), ps};
    };
    auto [outcome, ps] = readout(spec.angle);
    const GridMeter &m = success_grid(ps);
    res.outcome = outcome;
    res.grid_shifts = {m.mean_q(), m.mean_p()};
    const double s2 = spec.sigma * spec.sigma;
    res.q_closed_form = real ? 2.0 * spec.angle * s2 / spec.g : 0.0;
    res.p_closed_form = real ? 0.0 : -spec.angle / spec.g;
    res.p_f_closed_form = real ? spec.g * spec.g / (4.0 * s2) : spec.angle * spec.angle / 4.0;
    if (real) {
        res.matching_quadrature = "Q";
        res.angle_estimate = spec.g * res.grid_shifts.q / (2.0 * s2);
    } else {
        const double target = res.p_closed_form;
        const bool p_wins = std::abs(res.grid_shifts.p - target) <= std::abs(res.grid_shifts.q - target);
        res.matching_quadrature = p_wins ? "P" : "Q";
        res.angle_estimate = -spec.g * (p_wins ? res.grid_shifts.p : res.grid_shifts.q);
    }

    ParamDistribution fam;
    fam.masses = [&](double a) { return masses_of(readout(a).first); };
    const double h = 1e-4 * std::max(spec.g / spec.sigma, std::abs(spec.angle));
    const double f_f = classical_fisher(fam, spec.angle, h).fi;

    CMatrix G(2, 2);
    if (real) {
        G = 0.5 * Observable::pauli_y().matrix();
    } else {
        G << 0.0, 0.0, 0.0, 1.0;
    }
    SchemeReport &r = res.report;
    r.p_f = ps.p_f;
    r.fisher = ps.p_f * f_f;
    r.q_bound = generator_qfi(reduced_system(joint), G);
    r.snr_per_root_nu = std::abs(spec.angle) * std::sqrt(r.fisher);
    r.amplification = real ? 2.0 * s2 / spec.g : 1.0 / spec.g;
    r.regime = RegimeLabel::InverseWVA;
    return res;
}

AbwvaResult abwva_scheme(const AbwvaSpec &spec) {
    require_positive(spec.sigma, "sigma");
    const double span = 8.0 * spec.sigma;
    const GridMeter meter = to_grid(GaussianMeter(spec.sigma), span, spec.grid_points);
    const int pad = 8;
    const MomentumGrid mg = to_momentum(meter, pad);
    const double p_cut = 12.0 * 0.5 / spec.sigma;
    Eigen::Index lo = 0;
    while (lo < mg.amplitudes.size() && mg.p(lo) < -p_cut) {
        ++lo;
    }
    Eigen::Index hi = mg.amplitudes.size() - 1;
    while (hi > lo && mg.p(hi) > p_cut) {
        --hi;
    }
    const Eigen::Index n = hi - lo + 1;
    AbwvaResult res{};
    res.dp = mg.dp;
    res.p.resize(n);
    res.p0 = mg.amplitudes.segment(lo, n).cwiseAbs2();
    for (Eigen::Index k = 0; k < n; ++k) {
        res.p(k) = mg.p(lo + k);
    }

    auto split = [&](double g, Eigen::VectorXd &p1, Eigen::VectorXd &p2) {
        p1.resize(n);
        p2.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double s = std::sin(spec.epsilon + 2.0 * g * res.p(k));
            // The larger half is rounded; the smaller one is the exact remainder.
            if (s >= 0.0) {
                p1(k) = res.p0(k) * ((1.0 + s) / 2.0);
                p2(k) = res.p0(k) - p1(k);
            } else {
                p2(k) = res.p0(k) * ((1.0 - s) / 2.0);
                p1(k) = res.p0(k) - p2(k);
            }
        }
    };
    split(spec.g, res.p1, res.p2);
    res.sum = res.p1 + res.p2;
    res.difference = res.p1 - res.p2;
    const double dsum = res.difference.sum();
    res.centroid = res.p.dot(res.difference) / dsum;
    res.centroid_closed_form = spec.g / (std::tan(spec.epsilon) * 2.0 * spec.sigma * spec.sigma);
    res.signal_abwva = dsum * res.dp;
    {
        const double w = 1.0 / std::tan(spec.epsilon / 2.0);
        const double E = std::exp(-spec.g * spec.g / (2.0 * spec.sigma * spec.sigma));
        const double D = (1.0 + w * w) + (1.0 - w * w) * E;
        res.signal_standard = std::pow(std::sin(spec.epsilon / 2.0), 2) * D / 2.0;
    }

    ParamDistribution fam;
    fam.masses = [&](double g) {
        Eigen::VectorXd p1, p2;
        split(g, p1, p2);
        Eigen::VectorXd m(2 * n);
        m << p1, p2;
        return Eigen::VectorXd(m / m.sum());
    };
    SchemeReport &r = res.report;
    r.p_f = 1.0;
    r.fisher = classical_fisher(fam, spec.g).fi;
    r.q_bound = qfi_joint(bloch_state(kPi / 2, 0.0), GaussianMeter(spec.sigma),
                          CouplingConfig{spec.g, Generator::MomentumKick, Observable::pauli_z()});
    r.snr_per_root_nu = std::abs(spec.g) * std::sqrt(r.fisher);
    r.amplification = 1.0 / (std::tan(spec.epsilon) * 2.0 * spec.sigma * spec.sigma);
    r.regime = RegimeLabel::StandardWVA;
    return res;
}

SampledDistribution gaussian_spectrum(double omega0, double spread, int points) {
    require_positive(spread, "spread");
    if (points < 3) {
        fail(ErrorCode::InvalidArgument, "spectrum needs at least 3 points");
    }
    SampledDistribution d;
    d.dx = 16.0 * spread / (points - 1);
    d.x0 = omega0 - 8.0 * spread;
    d.values.resize(points);
    for (int i = 0; i < points; ++i) {
        const double z = (d.x(i) - omega0) / spread;
        d.values(i) = std::exp(-0.5 * z * z);
    }
    d.values /= d.values.sum() * d.dx;
    return d;
}

namespace {

struct WeightedData {
    std::vector<double> omega;
    std::vector<int> q;
    std::vector<double> weight;
};

/// Maximizes Σ w log[1 + q cos(φ − ωτ)] by damped Newton steps in centred coordinates.
std::pair<double, double> contrast_one_mle(const WeightedData &d) {
    double wsum = 0.0, wm = 0.0, wq = 0.0;
    for (std::size_t i = 0; i < d.omega.size(); ++i) {
        wsum += d.weight[i];
        wm += d.weight[i] * d.omega[i];
        wq += d.weight[i] * d.q[i];
    }
    const double mean_w = wm / wsum;
    double var = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < d.omega.size(); ++i) {
        const double x = d.omega[i] - mean_w;
        var += d.weight[i] * x * x;
        cov += d.weight[i] * x * d.q[i];
    }
    var /= wsum;
    cov /= wsum;
    if (!(var > 0.0)) {
        fail(ErrorCode::FlatLikelihood, "spectrum has no spread; delay and phase are not separable");
    }
    double phi = std::acos(std::clamp(wq / wsum, -0.999, 0.999));
    double tau = cov / (std::sin(phi) * var);

    auto loglik = [&](double t, double p) {
        double l = 0.0;
        for (std::size_t i = 0; i < d.omega.size(); ++i) {
            const double v = 1.0 + d.q[i] * std::cos(p - (d.omega[i] - mean_w) * t);
            if (!(v > 0.0)) {
                return -std::numeric_limits<double>::infinity();
            }
            l += d.weight[i] * std::log(v);
        }
        return l;
    };
    double l = loglik(tau, phi);
    if (!std::isfinite(l)) {
        tau = 0.0;
        l = loglik(tau, phi);
    }
    for (int it = 0; it < 100; ++it) {
        double gp = 0.0, gt = 0.0, hpp = 0.0, hpt = 0.0, htt = 0.0;
        for (std::size_t i = 0; i < d.omega.size(); ++i) {
            const double x = d.omega[i] - mean_w;
            const double u = phi - x * tau;
            const double v = 1.0 + d.q[i] * std::cos(u);
            const double s = -d.q[i] * std::sin(u) / v;
            const double c = d.weight[i] / v;
            gp += d.weight[i] * s;
            gt += -x * d.weight[i] * s;
            hpp -= c;
            hpt += x * c;
            htt -= x * x * c;
        }
        const double det = hpp * htt - hpt * hpt;
        double sp, st;
        if (hpp < 0.0 && det > 0.0) {
            sp = -(htt * gp - hpt * gt) / det;
            st = -(-hpt * gp + hpp * gt) / det;
        } else {
            sp = 1e-3 * gp / wsum;
            st = 1e-3 * gt / wsum;
        }
        double step = 1.0;
        double l_new = loglik(tau + step * st, phi + step * sp);
        while (!(l_new >= l) && step > 1e-12) {
            step *= 0.5;
            l_new = loglik(tau + step * st, phi + step * sp);
        }
        if (!(l_new >= l)) {
            break;
        }
        tau += step * st;
        phi += step * sp;
        const bool done = std::abs(step * st) <= 1e-13 * (std::abs(tau) + 1e-300) + 1e-300 &&
                          std::abs(step * sp) <= 1e-13;
        l = l_new;
        if (done || (std::abs(step * st) < 1e-12 * std::abs(tau) && std::abs(step * sp) < 1e-12)) {
            break;
        }
    }
    return {tau, phi + mean_w * tau};
}

}  // namespace

JointWmResult joint_wm_scheme(const JointWmSpec &spec) {
    const SampledDistribution &sp = spec.spectrum;
    if (sp.size() < 2 || !(sp.dx > 0.0)) {
        fail(ErrorCode::FlatLikelihood, "spectrum has no spread");
    }
    if (spec.photons < 1 || spec.trials < 1 || spec.epsilon < 0.0 || spec.omega_det < 0.0) {
        fail(ErrorCode::InvalidArgument, "joint measurement needs photons, trials >= 1 and non-negative noise");
    }
    const double mass = sp.mass();
    JointWmResult res{};
    res.spread = std::sqrt(sp.variance());
    if (!(res.spread > 0.0)) {
        fail(ErrorCode::FlatLikelihood, "spectrum has no spread");
    }
    const double V = std::exp(-spec.epsilon * spec.epsilon / 2.0);
    const Eigen::Index n = sp.size();
    res.omega.resize(n);
    res.p_plus.resize(n);
    res.p_minus.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = sp.x(i);
        const double c = V * std::cos(spec.phi - w * spec.tau);
        res.omega(i) = w;
        res.p_plus(i) = 0.5 * sp.values(i) / mass * (1.0 + c);
        res.p_minus(i) = 0.5 * sp.values(i) / mass * (1.0 - c);
    }

    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32)};
    std::mt19937_64 rng(seq);
    std::discrete_distribution<Eigen::Index> cell(sp.values.data(), sp.values.data() + n);
    std::uniform_real_distribution<double> jitter(-0.5 * sp.dx, 0.5 * sp.dx);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> taus, phis;
    WeightedData data;
    data.weight.assign(spec.photons, 1.0);
    for (int t = 0; t < spec.trials; ++t) {
        data.omega.clear();
        data.q.clear();
        for (long k = 0; k < spec.photons; ++k) {
            const double w = sp.x(cell(rng)) + jitter(rng);
            const double p_plus = 0.5 * (1.0 + V * std::cos(spec.phi - w * spec.tau));
            data.q.push_back(unit(rng) < p_plus ? 1 : -1);
            data.omega.push_back(w + spec.omega_det * noise(rng));
        }
        auto [tau, phi] = contrast_one_mle(data);
        taus.push_back(tau);
        phis.push_back(phi);
    }
    double mt = 0.0, mp = 0.0;
    for (int t = 0; t < spec.trials; ++t) {
        mt += taus[t];
        mp += phis[t];
    }
    mt /= spec.trials;
    mp /= spec.trials;
    double vt = 0.0;
    for (double t : taus) {
        vt += (t - mt) * (t - mt);
    }
    res.tau_mean = mt;
    res.phi_mean = mp;
    res.tau_se = spec.trials > 1 ? std::sqrt(vt / (spec.trials - 1) / spec.trials) : 0.0;

    // Large-sample limit: the same fit applied to the exact distribution of (ω', q).
    WeightedData expect;
    const double det_sd = spec.omega_det;
    const long extra = det_sd > 0.0 ? static_cast<long>(std::ceil(8.0 * det_sd / sp.dx)) : 0;
    for (long j = -extra; j < n + extra; ++j) {
        const double wd = sp.x(0) + static_cast<double>(j) * sp.dx;
        double wp = 0.0, wmn = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double kernel;
            if (det_sd > 0.0) {
                const double z = (wd - sp.x(i)) / det_sd;
                kernel = std::exp(-0.5 * z * z) / (det_sd * std::sqrt(2.0 * kPi)) * sp.dx;
            } else {
                kernel = j == i ? 1.0 : 0.0;
            }
            if (kernel == 0.0) {
                continue;
            }
            wp += kernel * res.p_plus(i) * sp.dx;
            wmn += kernel * res.p_minus(i) * sp.dx;
        }
        if (wp > 0.0) {
            expect.omega.push_back(wd);
            expect.q.push_back(1);
            expect.weight.push_back(wp);
        }
        if (wmn > 0.0) {
            expect.omega.push_back(wd);
            expect.q.push_back(-1);
            expect.weight.push_back(wmn);
        }
    }
    auto [tl, pl] = contrast_one_mle(expect);
    res.tau_limit = tl;
    res.phi_limit = pl;
    res.bias_factor_formula = 0.5 * std::pow(spec.epsilon / std::sin(spec.phi), 2) +
                              0.5 * std::pow(spec.omega_det / res.spread, 2);
    return res;
}

double biased_sweet_spot(double omega0, double epsilon) {
    require_positive(omega0, "omega0");
    return epsilon / omega0;
}

BiasedResult biased_scheme(const BiasedSpec &spec) {
    require_positive(spec.omega0, "omega0");
    require_positive(spec.delta, "delta");
    if (spec.grid_points < 3) {
        fail(ErrorCode::InvalidArgument, "frequency grid needs at least 3 points");
    }
    const int n = spec.grid_points;
    const double half = 10.0 * spec.delta;
    const double dw = 2.0 * half / (n - 1);
    BiasedResult res{};
    res.omega.resize(n);
    Eigen::VectorXd f2(n);
    for (int i = 0; i < n; ++i) {
        const double x = -half + i * dw;
        res.omega(i) = spec.omega0 + x;
        f2(i) = std::exp(-x * x / (spec.delta * spec.delta));
    }
    f2 /= f2.sum() * dw;

    auto spectrum = [&](double tau) {
        const double b = spec.beta + tau;
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i) {
            const double a = std::sin(res.omega(i) * b - spec.epsilon);
            s(i) = a * a * f2(i);
        }
        return s;
    };
    auto shift = [&](const Eigen::VectorXd &s) {
        double num = 0.0;
        for (int i = 0; i < n; ++i) {
            num += s(i) * (res.omega(i) - spec.omega0);
        }
        return num / s.sum();
    };
    res.spectrum = spectrum(spec.tau);
    res.shift = shift(res.spectrum);
    const double h = 1e-4 * std::max(std::abs(spec.beta) * spec.delta, std::abs(spec.epsilon)) / spec.omega0;
    res.slope = (shift(spectrum(spec.tau + h)) - shift(spectrum(spec.tau - h))) / (2.0 * h);
    res.slope_closed_form = 2.0 * spec.omega0 * spec.omega0 / spec.epsilon;
    res.p_f_grid = res.spectrum.sum() * dw;
    const double b = spec.beta + spec.tau;
    res.p_f_closed_form =
        0.5 * (1.0 - std::exp(-spec.delta * spec.delta * b * b) * std::cos(2.0 * (spec.omega0 * b - spec.epsilon)));
    res.p_f_approx = spec.delta * spec.delta * spec.epsilon * spec.epsilon / (2.0 * spec.omega0 * spec.omega0);
    if (spec.resolution > 0.0) {
        res.tau_bound_standard = std::abs(spec.epsilon) * spec.resolution / (spec.delta * spec.delta);
        res.tau_bound_biased = std::abs(spec.epsilon) * spec.resolution / (2.0 * spec.omega0 * spec.omega0);
    }

    ParamDistribution fam;
    fam.masses = [&](double tau) {
        Eigen::VectorXd s = spectrum(tau);
        return Eigen::VectorXd(s / s.sum());
    };
    const double f_f = classical_fisher(fam, spec.tau, h).fi;
    SchemeReport &r = res.report;
    r.p_f = res.p_f_grid;
    r.fisher = r.p_f * f_f;
    r.q_bound = 4.0 * f2.dot(res.omega.cwiseProduct(res.omega)) * dw;
    r.snr_per_root_nu = std::abs(spec.tau) * std::sqrt(r.fisher);
    r.amplification = std::abs(res.slope);
    r.regime = RegimeLabel::StandardWVA;
    return res;
}

RecycleResult recycle_scheme(const RecycleSpec &spec) {
    if (!(spec.p_f > 0.0) || spec.p_f > 1.0 || spec.loss < 0.0 || spec.loss >= 1.0 || spec.rounds == 0 ||
        spec.rounds < -1 || spec.mirror_r < 0.0 || spec.mirror_r >= 1.0) {
        fail(ErrorCode::InvalidArgument,
             "recycling needs 0 < p_f <= 1, 0 <= loss < 1, rounds >= 1 or -1, 0 <= r < 1");
    }
    const double x = (1.0 - spec.p_f) * (1.0 - spec.loss);
    RecycleResult res{};
    if (spec.rounds < 0) {
        res.detected_fraction = spec.p_f / (1.0 - x);
    } else {
        double sum = 0.0;
        double nj = 1.0;
        for (long j = 0; j < spec.rounds; ++j) {
            sum += spec.p_f * nj;
            nj *= x;
        }
        res.detected_fraction = sum;
    }
    res.snr_gain = std::sqrt(res.detected_fraction / spec.p_f);
    if (spec.mirror_r > 0.0) {
        const double r = spec.mirror_r;
        const double t = 1.0 - spec.loss;
        const double G = (1.0 - r) / (1.0 + t * r - 2.0 * std::sqrt(r * t));
        res.cavity_gain = G;
        res.cavity_snr_gain = std::sqrt(G);
    }
    return res;
}

PhaseSpaceResult phase_space_scheme(const PhaseSpaceSpec &spec, const FockMeter &meter) {
    meter.check_truncation();
    const SystemState pre = bloch_state(kPi / 2, 0.0);
    CVector f(2);
    f << -std::polar(1.0, -spec.epsilon), 1.0;
    const SystemState post = SystemState::normalized(f);
    CMatrix c = CMatrix::Zero(2, 2);
    c(1, 1) = 1.0;
    const Observable C(c);
    const CouplingConfig cfg{spec.g, Generator::PhotonNumberPhase, C};
    PhaseSpaceResult res{};
    if (meter.is_pure()) {
        res.budget = info_budget(pre, post, cfg, meter);
    }
    res.weak_value = weak_value(pre, post, C);
    PostSelectedMeter ps = postselect(evolve_joint(pre, meter, cfg), post);
    if (ps.empty) {
        fail(ErrorCode::EmptyPostselection, "post-selection never succeeds");
    }
    const FockMeter &fm = std::get<FockMeter>(*ps.success_meter);
    res.photon_distribution = fm.density().diagonal().real();
    res.p_f = ps.p_f;
    // P(n, f) = p_n |a + b e^{−ign}|²; the coupling is diagonal in n.
    const cplx a = std::conj(post.amplitudes()(0)) * pre.amplitudes()(0);
    const cplx b = std::conj(post.amplitudes()(1)) * pre.amplitudes()(1);
    const Eigen::VectorXd pn = meter.density().diagonal().real();
    Eigen::VectorXd P(pn.size()), dP(pn.size());
    for (Eigen::Index n = 0; n < pn.size(); ++n) {
        const double nd = static_cast<double>(n);
        const cplx e = std::polar(1.0, -spec.g * nd);
        const cplx amp = a + b * e;
        P(n) = pn(n) * std::norm(amp);
        dP(n) = pn(n) * 2.0 * (std::conj(amp) * (cplx(0.0, -nd) * b * e)).real();
    }
    const double pf = P.sum();
    const double dpf = dP.sum();
    res.f_wva = 0.0;
    for (Eigen::Index n = 0; n < pn.size(); ++n) {
        if (P(n) > 0.0) {
            const double d = dP(n) - P(n) / pf * dpf;
            res.f_wva += d * d / P(n);
        }
    }
    const FockMoments m0 = fock_moments(meter);
    const FockMoments mf = fock_moments(fm);
    res.mean_shift = mf.mean - m0.mean;
    const double im = res.weak_value.imag();
    res.mean_shift_closed_form = 2.0 * spec.g * im * m0.variance;
    res.p_f_closed_form = 0.5 * (1.0 - std::cos(spec.g * m0.mean + spec.epsilon));
    res.f_wva_closed_form = 4.0 * ps.p_f * im * im * m0.variance;
    return res;
}

ScalingFit phase_space_scaling(const std::vector<double> &mean_photons, double epsilon, double g) {
    if (mean_photons.size() < 2) {
        fail(ErrorCode::InvalidArgument, "scaling fit needs at least two photon numbers");
    }
    ScalingFit fit;
    for (double n : mean_photons) {
        require_positive(n, "mean photon number");
        PhaseSpaceResult r = phase_space_scheme({g, epsilon}, FockMeter::coherent(std::sqrt(n)));
        fit.n.push_back(n);
        fit.f_p.push_back(r.budget->f_p);
    }
    const double k = static_cast<double>(fit.n.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < fit.n.size(); ++i) {
        const double x = std::log(fit.n[i]);
        const double y = std::log(fit.f_p[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / k;
    return fit;
}

EntangledResult entangled_scheme(const EntangledSpec &spec) {
    if (spec.n < 1) {
        fail(ErrorCode::InvalidArgument, "N must be >= 1");
    }
    const double n = static_cast<double>(spec.n);
    const double angle = spec.post == EntangledPost::MaxProb ? n * spec.epsilon : std::sqrt(n) * spec.epsilon;
    // Basis {|0⟩^⊗N, |1⟩^⊗N}; A^(N) = diag(N, −N).
    const double a[2] = {n, -n};
    const cplx pre[2] = {1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2};
    const cplx post[2] = {std::polar(1.0 / std::numbers::sqrt2, -angle), -std::polar(1.0 / std::numbers::sqrt2, angle)};
    const cplx i1(0.0, 1.0);

    EntangledResult res{};
    res.q_exact = 4LL * spec.n * spec.n;
    cplx num = 0.0, den = 0.0;
    for (int k = 0; k < 2; ++k) {
        num += std::conj(post[k]) * a[k] * pre[k];
        den += std::conj(post[k]) * pre[k];
    }
    res.p_f = std::norm(den);
    res.weak_value = num / den;
    res.p_f_closed_form = spec.post == EntangledPost::MaxProb ? n * n * spec.epsilon * spec.epsilon
                                                              : n * spec.epsilon * spec.epsilon;
    res.weak_value_closed_form =
        spec.post == EntangledPost::MaxProb ? 1.0 / spec.epsilon : std::sqrt(n) / spec.epsilon;

    // Meter qubit |+⟩ coupled by exp(−iφ A σ_z); c_m and dc_m/dφ for σ_z = m.
    double pm[2], dpm[2];
    double pf = 0.0, dpf = 0.0;
    for (int mi = 0; mi < 2; ++mi) {
        const double m = mi == 0 ? 1.0 : -1.0;
        cplx c = 0.0, dc = 0.0;
        for (int k = 0; k < 2; ++k) {
            const cplx base = std::conj(post[k]) * pre[k] * std::exp(-i1 * spec.phi * a[k] * m) / std::numbers::sqrt2;
            c += base;
            dc += -i1 * a[k] * m * base;
        }
        pm[mi] = std::norm(c);
        dpm[mi] = 2.0 * (std::conj(c) * dc).real();
        pf += pm[mi];
        dpf += dpm[mi];
    }
    double f_f = 0.0;
    for (int mi = 0; mi < 2; ++mi) {
        const double P = pm[mi] / pf;
        const double dP = (dpm[mi] * pf - pm[mi] * dpf) / (pf * pf);
        res.meter_distribution(mi) = P;
        if (P > 1e-300) {
            f_f += dP * dP / P;
        }
    }
    res.sql_baseline = 4.0 * n;
    SchemeReport &r = res.report;
    r.p_f = pf;
    r.fisher = pf * f_f;
    r.q_bound = static_cast<double>(res.q_exact);
    r.snr_per_root_nu = std::abs(spec.phi) * std::sqrt(r.fisher);
    r.amplification = std::abs(res.weak_value);
    r.regime = RegimeLabel::StandardWVA;
    return res;
}

void to_json(nlohmann::json &j, const SchemeReport &r) {
    j = nlohmann::json{{"amplification", r.amplification},
                       {"p_f", r.p_f},
                       {"fisher", r.fisher},
                       {"q_bound", r.q_bound},
                       {"snr_per_root_nu", r.snr_per_root_nu},
                       {"regime", to_string(r.regime)},
                       {"warnings", r.warnings}};
}

}  // namespace wvalab
