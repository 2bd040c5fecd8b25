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

#include "wvalab/qsys.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "wvalab/error.hpp"

namespace wvalab {

namespace {

constexpr double kNormTol = 1e-12;
constexpr double kHermTol = 1e-12;

bool is_hermitian(const CMatrix &m, double tol) {
    return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char *what) {
    if (a != b) {
        fail(ErrorCode::InvalidArgument, std::string("dimension mismatch in ") + what);
    }
}

}  // namespace

SystemState::SystemState(CVector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 2) {
        fail(ErrorCode::InvalidState, "system dimension must be at least 2");
    }
    if (std::abs(amps_.norm() - 1.0) > kNormTol) {
        fail(ErrorCode::InvalidState, "state is not normalized");
    }
}

SystemState SystemState::normalized(const CVector &v) {
    double n = v.norm();
    if (!(n > 0.0)) {
        fail(ErrorCode::NullVector, "cannot normalize the zero vector");
    }
    return SystemState(v / n);
}

DensityState SystemState::density() const {
    return DensityState(amps_ * amps_.adjoint());
}

DensityState::DensityState(CMatrix matrix) : rho_(std::move(matrix)) {
    if (rho_.rows() < 2 || !is_hermitian(rho_, kHermTol)) {
        fail(ErrorCode::InvalidState, "density matrix must be Hermitian with d >= 2");
    }
    if (std::abs(rho_.trace() - cplx(1.0)) > kNormTol) {
        fail(ErrorCode::InvalidState, "density matrix must have unit trace");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        fail(ErrorCode::InvalidState, "density matrix has a negative eigenvalue");
    }
}

Observable::Observable(CMatrix matrix) : m_(std::move(matrix)) {
    if (!is_hermitian(m_, kHermTol)) {
        fail(ErrorCode::InvalidArgument, "observable must be square and Hermitian");
    }
}

Observable Observable::pauli_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return Observable(m);
}

Observable Observable::pauli_y() {
    CMatrix m(2, 2);
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return Observable(m);
}

Observable Observable::pauli_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return Observable(m);
}

Observable Observable::identity(Eigen::Index dim) {
    return Observable(CMatrix::Identity(dim, dim));
}

Observable Observable::projector(const SystemState &state) {
    CMatrix p = state.amplitudes() * state.amplitudes().adjoint();
    // Outer products are Hermitian up to rounding in the off-diagonal conjugates.
    return Observable(0.5 * (p + p.adjoint()));
}

CMatrix Observable::power(int n) const {
    if (n < 0) {
        fail(ErrorCode::InvalidArgument, "negative operator power");
    }
    CMatrix out = CMatrix::Identity(dim(), dim());
    for (int k = 0; k < n; ++k) {
        out = out * m_;
    }
    return out;
}

SystemState bloch_state(double theta, double phi) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    theta = std::remainder(theta, two_pi);
    phi = std::remainder(phi, two_pi);
    CVector v(2);
    v << std::cos(theta / 2.0), std::sin(theta / 2.0) * std::polar(1.0, phi);
    return SystemState::normalized(v);
}

cplx overlap(const SystemState &a, const SystemState &b) {
    require_same_dim(a.dim(), b.dim(), "overlap");
    return a.amplitudes().dot(b.amplitudes());
}

double expectation(const SystemState &state, const Observable &A) {
    require_same_dim(state.dim(), A.dim(), "expectation");
    return state.amplitudes().dot(A.matrix() * state.amplitudes()).real();
}

double variance(const SystemState &state, const Observable &A) {
    CVector av = A.matrix() * state.amplitudes();
    double m1 = state.amplitudes().dot(av).real();
    double m2 = av.squaredNorm();
    return std::max(0.0, m2 - m1 * m1);
}

cplx weak_value(const SystemState &pre, const SystemState &post, const Observable &A, double threshold) {
    require_same_dim(pre.dim(), post.dim(), "weak_value");
    require_same_dim(pre.dim(), A.dim(), "weak_value");
    cplx denom = post.amplitudes().dot(pre.amplitudes());
    if (std::abs(denom) <= threshold) {
        fail(ErrorCode::OrthogonalSelection, "pre- and post-selected states are orthogonal");
    }
    return post.amplitudes().dot(A.matrix() * pre.amplitudes()) / denom;
}

cplx high_order_weak_value(const DensityState &rho, const Observable &post_projector, const Observable &A, int m,
                           int l) {
    require_same_dim(rho.dim(), post_projector.dim(), "high_order_weak_value");
    require_same_dim(rho.dim(), A.dim(), "high_order_weak_value");
    if (m < 0 || l < 0) {
        fail(ErrorCode::InvalidArgument, "weak-value orders must be nonnegative");
    }
    const CMatrix &pi = post_projector.matrix();
    cplx denom = (pi * rho.matrix()).trace();
    if (std::abs(denom) <= kOrthogonalityThreshold) {
        fail(ErrorCode::OrthogonalSelection, "Tr(Pi rho) vanishes; use orthogonal_weak_value");
    }
    cplx num = (pi * A.power(m) * rho.matrix() * A.power(l)).trace();
    return num / denom;
}

cplx orthogonal_weak_value(const DensityState &rho, const Observable &post_projector, const Observable &A, int m,
                           int l) {
    require_same_dim(rho.dim(), post_projector.dim(), "orthogonal_weak_value");
    require_same_dim(rho.dim(), A.dim(), "orthogonal_weak_value");
    if (m < 0 || l < 0) {
        fail(ErrorCode::InvalidArgument, "weak-value orders must be nonnegative");
    }
    const CMatrix &pi = post_projector.matrix();
    const CMatrix &a = A.matrix();
    if (std::abs((pi * rho.matrix()).trace()) > kOrthogonalityThreshold) {
        fail(ErrorCode::NotOrthogonal, "pre- and post-selection overlap exceeds the orthogonality threshold");
    }
    cplx denom = (pi * a * rho.matrix() * a).trace();
    if (std::abs(denom) <= kOrthogonalityThreshold) {
        fail(ErrorCode::DegenerateDenominator, "Tr(Pi A rho A) vanishes");
    }
    cplx num = (pi * A.power(m + 1) * rho.matrix() * A.power(l + 1)).trace();
    return num / (static_cast<double>((m + 1) * (l + 1)) * denom);
}

SystemState optimal_postselection(const SystemState &pre, const Observable &A) {
    require_same_dim(pre.dim(), A.dim(), "optimal_postselection");
    CVector v = A.matrix() * pre.amplitudes();
    if (v.norm() <= kOrthogonalityThreshold) {
        fail(ErrorCode::NullVector, "observable annihilates the pre-selected state");
    }
    // |A psi| = <A^2>^{1/2}
    return SystemState(v / v.norm());
}

SystemState qubit_complement(const SystemState &state) {
    if (state.dim() != 2) {
        fail(ErrorCode::InvalidArgument, "complement state is defined for qubits only");
    }
    const CVector &a = state.amplitudes();
    CVector v(2);
    v << -std::conj(a(1)), std::conj(a(0));
    return SystemState::normalized(v);
}

}  // namespace wvalab
