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

#include "wvalab/coupling.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "wvalab/error.hpp"

namespace wvalab {

namespace {

constexpr double kEmptyProbability = 1e-24;

struct Sector {
    double eigenvalue;
    CMatrix projector;
};

std::vector<Sector> spectral_sectors(const Observable &A) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(A.matrix());
    const auto &vals = es.eigenvalues();
    const auto &vecs = es.eigenvectors();
    std::vector<Sector> out;
    Eigen::Index start = 0;
    const Eigen::Index d = vals.size();
    while (start < d) {
        Eigen::Index stop = start + 1;
        while (stop < d && std::abs(vals(stop) - vals(start)) <= 1e-10 * std::max(1.0, std::abs(vals(start)))) {
            ++stop;
        }
        CMatrix block = vecs.middleCols(start, stop - start);
        double mean = vals.segment(start, stop - start).mean();
        out.push_back(Sector{mean, block * block.adjoint()});
        start = stop;
    }
    return out;
}

}  // namespace

double JointState::norm() const {
    double total = 0.0;
    for (const auto &c : components) {
        double part = 0.0;
        for (const auto &b : c.branches) {
            part += b.system.squaredNorm() * b.meter.squaredNorm() * measure();
        }
        total += c.weight * part;
    }
    return total;
}

Eigen::Index JointState::system_dim() const {
    if (components.empty() || components.front().branches.empty()) {
        return 0;
    }
    return components.front().branches.front().system.size();
}

JointState evolve_joint(const SystemState &pre, const MeterState &meter, const CouplingConfig &cfg,
                        const EvolveOptions &options) {
    if (!std::isfinite(cfg.g)) {
        fail(ErrorCode::InvalidArgument, "coupling strength must be finite");
    }
    if (cfg.A.dim() != pre.dim()) {
        fail(ErrorCode::InvalidArgument, "observable and pre-selected state dimensions differ");
    }
    const auto sectors = spectral_sectors(cfg.A);
    JointState joint;
    joint.generator = cfg.generator;

    if (cfg.generator == Generator::MomentumKick) {
        if (const auto *gm = std::get_if<GaussianMeter>(&meter)) {
            double max_shift = 0.0;
            for (const auto &s : sectors) {
                max_shift = std::max(max_shift, std::abs(s.eigenvalue * cfg.g));
            }
            const double span = options.span > 0.0 ? options.span : 8.0 * (gm->sigma + max_shift);
            if (span < 8.0 * gm->sigma) {
                fail(ErrorCode::InsufficientSpan, "grid half-width must cover at least 8 sigma");
            }
            if (options.grid_points < 256) {
                fail(ErrorCode::InvalidArgument, "grid needs at least 256 points");
            }
            const int n = options.grid_points;
            joint.kind = MeterKind::Grid;
            joint.dq = 2.0 * span / n;
            joint.q0 = gm->mean_q - span;
            double base = 0.0;
            for (int j = 0; j < n; ++j) {
                base += std::norm(gaussian_amplitude(*gm, joint.q0 + j * joint.dq));
            }
            const double scale = 1.0 / std::sqrt(base * joint.dq);
            JointComponent comp{1.0, {}};
            for (const auto &s : sectors) {
                CVector m(n);
                for (int j = 0; j < n; ++j) {
                    m(j) = scale * gaussian_amplitude(*gm, joint.q0 + j * joint.dq - s.eigenvalue * cfg.g);
                }
                comp.branches.push_back(JointBranch{s.eigenvalue, s.projector * pre.amplitudes(), std::move(m)});
            }
            joint.components.push_back(std::move(comp));
            return joint;
        }
        if (const auto *grid = std::get_if<GridMeter>(&meter)) {
            joint.kind = MeterKind::Grid;
            joint.q0 = grid->q0();
            joint.dq = grid->dq();
            JointComponent comp{1.0, {}};
            for (const auto &s : sectors) {
                CVector m = displace(*grid, s.eigenvalue * cfg.g).amplitudes();
                comp.branches.push_back(JointBranch{s.eigenvalue, s.projector * pre.amplitudes(), std::move(m)});
            }
            joint.components.push_back(std::move(comp));
            return joint;
        }
        fail(ErrorCode::IncompatibleMeter, "a momentum kick needs a Gaussian or grid meter");
    }

    const auto *fock = std::get_if<FockMeter>(&meter);
    if (fock == nullptr) {
        fail(ErrorCode::IncompatibleMeter, "a photon-number phase needs a Fock meter");
    }
    joint.kind = MeterKind::Fock;
    joint.tail_mass = fock->tail_mass();
    for (const auto &fc : fock->components()) {
        JointComponent comp{fc.weight, {}};
        for (const auto &s : sectors) {
            CVector m(fc.coefficients.size());
            for (Eigen::Index k = 0; k < m.size(); ++k) {
                m(k) = fc.coefficients(k) * std::polar(1.0, -cfg.g * s.eigenvalue * static_cast<double>(k));
            }
            comp.branches.push_back(JointBranch{s.eigenvalue, s.projector * pre.amplitudes(), std::move(m)});
        }
        joint.components.push_back(std::move(comp));
    }
    return joint;
}

namespace {

struct Projected {
    std::vector<std::pair<double, CVector>> parts;  // (component weight, unnormalized meter)
    double probability = 0.0;
};

Projected project(const JointState &joint, const CVector &bra) {
    Projected out;
    for (const auto &c : joint.components) {
        CVector acc = CVector::Zero(c.branches.front().meter.size());
        for (const auto &b : c.branches) {
            acc += bra.dot(b.system) * b.meter;
        }
        double p = acc.squaredNorm() * joint.measure();
        out.probability += c.weight * p;
        out.parts.emplace_back(c.weight, std::move(acc));
    }
    return out;
}

std::optional<MeterState> conditioned_meter(const JointState &joint, const Projected &proj) {
    if (proj.probability < kEmptyProbability) {
        return std::nullopt;
    }
    if (joint.kind == MeterKind::Grid) {
        return MeterState{GridMeter::normalized(joint.q0, joint.dq, proj.parts.front().second)};
    }
    std::vector<FockComponent> comps;
    for (const auto &[w, v] : proj.parts) {
        double p = v.squaredNorm();
        if (w * p <= 0.0) {
            continue;
        }
        comps.push_back(FockComponent{w * p / proj.probability, v / std::sqrt(p)});
    }
    double total = 0.0;
    for (const auto &c : comps) {
        total += c.weight;
    }
    for (auto &c : comps) {
        c.weight /= total;
    }
    return MeterState{FockMeter::ensemble(std::move(comps), joint.tail_mass)};
}

}  // namespace

PostSelectedMeter postselect(const JointState &joint, const SystemState &post) {
    if (post.dim() != joint.system_dim()) {
        fail(ErrorCode::InvalidArgument, "post-selected state dimension does not match the joint state");
    }
    PostSelectedMeter out;
    Projected success = project(joint, post.amplitudes());
    out.empty = success.probability < kEmptyProbability;
    out.p_f = out.empty ? 0.0 : std::clamp(success.probability, 0.0, 1.0);
    out.p_r = 1.0 - out.p_f;
    out.success_meter = conditioned_meter(joint, success);
    if (post.dim() == 2) {
        Projected failure = project(joint, qubit_complement(post).amplitudes());
        out.failure_meter = conditioned_meter(joint, failure);
    }
    return out;
}

std::vector<ArmVectors> arm_vectors(const JointState &joint, const CVector &bra) {
    std::vector<ArmVectors> out;
    for (const auto &c : joint.components) {
        const Eigen::Index len = c.branches.front().meter.size();
        CVector v = CVector::Zero(len);
        CVector dv = CVector::Zero(len);
        for (const auto &b : c.branches) {
            cplx amp = bra.dot(b.system);
            if (amp == cplx(0.0)) {
                continue;
            }
            v += amp * b.meter;
            CVector gm;
            if (joint.kind == MeterKind::Grid) {
                gm = apply_momentum_function(joint.q0, joint.dq, b.meter, [](double p) { return cplx(p); });
            } else {
                gm = b.meter;
                for (Eigen::Index k = 0; k < len; ++k) {
                    gm(k) *= static_cast<double>(k);
                }
            }
            dv += amp * cplx(0.0, -b.eigenvalue) * gm;
        }
        out.push_back(ArmVectors{c.weight, std::move(v), std::move(dv)});
    }
    return out;
}

Shifts aav_shifts(cplx weak_value, double g, double sigma) {
    return Shifts{g * weak_value.real(), g * weak_value.imag() / (2.0 * sigma * sigma)};
}

Shifts exact_shifts(cplx weak_value, double g, double sigma) {
    const double denom = 4.0 * sigma * sigma + g * g * (std::norm(weak_value) - 1.0);
    if (denom == 0.0) {
        fail(ErrorCode::DegenerateDenominator, "shift denominator vanishes");
    }
    return Shifts{4.0 * g * weak_value.real() * sigma * sigma / denom, 2.0 * g * weak_value.imag() / denom};
}

Shifts orthogonal_shifts(cplx orthogonal_weak_value, double g, double sigma) {
    return Shifts{g * orthogonal_weak_value.real(), 3.0 * g * orthogonal_weak_value.imag() / (2.0 * sigma * sigma)};
}

const char *to_string(RegimeLabel label) {
    switch (label) {
    case RegimeLabel::Strong:
        return "Strong";
    case RegimeLabel::StandardWVA:
        return "StandardWVA";
    case RegimeLabel::InverseWVA:
        return "InverseWVA";
    }
    return "Unknown";
}

RegimeReport classify_regime(double g, double sigma, cplx weak_value) {
    if (!(g > 0.0) || !(sigma > 0.0)) {
        fail(ErrorCode::InvalidArgument, "regime classification needs g > 0 and sigma > 0");
    }
    RegimeReport r{RegimeLabel::StandardWVA, g / sigma, g * std::abs(weak_value) / sigma};
    if (r.coupling_ratio >= 1.0) {
        r.label = RegimeLabel::Strong;
    } else if (r.amplified_ratio >= 1.0) {
        r.label = RegimeLabel::InverseWVA;
    }
    return r;
}

double trapped_ion_shift(double gamma, double theta, double gamma0_t) {
    if (!(gamma > 0.0)) {
        fail(ErrorCode::InvalidArgument, "relative coupling strength must be positive");
    }
    const double x = 0.5 * gamma * gamma;
    const double s = std::sin(theta);
    // 1 - cos(2θ)e^{-x} written without cancellation.
    const double denom = -std::expm1(-x) + std::exp(-x) * 2.0 * s * s;
    if (denom < 1e-15) {
        fail(ErrorCode::DegenerateDenominator, "trapped-ion shift denominator vanishes");
    }
    return -gamma0_t * std::sin(2.0 * theta) / denom;
}

double aav_condition_margin(const SystemState &pre, const SystemState &post, const Observable &A, double g,
                            double sigma, int n_max) {
    if (!(sigma > 0.0) || n_max < 1) {
        fail(ErrorCode::InvalidArgument, "margin needs sigma > 0 and n_max >= 1");
    }
    const double ov = std::abs(overlap(post, pre));
    if (ov <= kOrthogonalityThreshold) {
        fail(ErrorCode::OrthogonalSelection, "pre- and post-selected states are orthogonal");
    }
    if (g == 0.0) {
        return 0.0;
    }
    double best = 0.0;
    CVector v = pre.amplitudes();
    for (int n = 1; n <= n_max; ++n) {
        v = A.matrix() * v;
        double m = std::abs(post.amplitudes().dot(v));
        best = std::max(best, std::pow(m, 1.0 / n) / ov);
    }
    return std::abs(g) * best / sigma;
}

}  // namespace wvalab
