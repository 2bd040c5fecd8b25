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

#include <complex>

#include <Eigen/Dense>

namespace wvalab {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kOrthogonalityThreshold = 1e-12;

class DensityState;

/// Normalized pure state of a finite-dimensional system (d >= 2).
class SystemState {
  public:
    /// Throws InvalidState unless d >= 2 and the norm is 1 within 1e-12.
    explicit SystemState(CVector amplitudes);

    /// Rescales an arbitrary nonzero vector to unit norm.
    static SystemState normalized(const CVector &v);

    const CVector &amplitudes() const {
        return amps_;
    }
    Eigen::Index dim() const {
        return amps_.size();
    }
    DensityState density() const;

  private:
    CVector amps_;
};

/// Hermitian, unit-trace, positive semidefinite matrix; validated once on construction.
class DensityState {
  public:
    explicit DensityState(CMatrix matrix);

    const CMatrix &matrix() const {
        return rho_;
    }
    Eigen::Index dim() const {
        return rho_.rows();
    }

  private:
    CMatrix rho_;
};

class Observable {
  public:
    /// Throws InvalidArgument unless square and Hermitian within 1e-12.
    explicit Observable(CMatrix matrix);

    static Observable pauli_x();
    static Observable pauli_y();
    static Observable pauli_z();
    static Observable identity(Eigen::Index dim);
    static Observable projector(const SystemState &state);

    const CMatrix &matrix() const {
        return m_;
    }
    Eigen::Index dim() const {
        return m_.rows();
    }
    CMatrix power(int n) const;

  private:
    CMatrix m_;
};

/// cos(theta/2)|0> + sin(theta/2) e^{i phi}|1>.
SystemState bloch_state(double theta, double phi);

/// <a|b>
cplx overlap(const SystemState &a, const SystemState &b);
double expectation(const SystemState &state, const Observable &A);
double variance(const SystemState &state, const Observable &A);

/// <post|A|pre> / <post|pre>. Throws OrthogonalSelection when |<post|pre>| <= threshold.
cplx weak_value(const SystemState &pre, const SystemState &post, const Observable &A,
                double threshold = kOrthogonalityThreshold);

/// Tr(Pi A^m rho A^l) / Tr(Pi rho).
cplx high_order_weak_value(const DensityState &rho, const Observable &post_projector,
                           const Observable &A, int m, int l);

/// Tr(Pi A^{m+1} rho A^{l+1}) / [(m+1)(l+1) Tr(Pi A rho A)], defined only for
/// strictly orthogonal pre/post selection.
cplx orthogonal_weak_value(const DensityState &rho, const Observable &post_projector,
                           const Observable &A, int m, int l);

/// A|pre> normalized; the post-selection that concentrates the joint-state QFI.
SystemState optimal_postselection(const SystemState &pre, const Observable &A);

/// State orthogonal to `state` within the qubit space (the failure arm of a
/// two-outcome post-selection). Requires dim == 2.
SystemState qubit_complement(const SystemState &state);

}  // namespace wvalab
