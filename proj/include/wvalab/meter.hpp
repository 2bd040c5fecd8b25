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

#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wvalab/qsys.hpp"

namespace wvalab {

/// Minimum-uncertainty Gaussian pointer with amplitude ~ exp(-(q-q0)^2 / 4 sigma^2).
struct GaussianMeter {
    double sigma = 1.0;
    double mean_q = 0.0;
    double mean_p = 0.0;

    GaussianMeter() = default;
    GaussianMeter(double sigma, double mean_q = 0.0, double mean_p = 0.0);

    double variance_q() const {
        return sigma * sigma;
    }
    double variance_p() const {
        return 1.0 / (4.0 * sigma * sigma);
    }
};

double gaussian_density(const GaussianMeter &meter, double q);
cplx gaussian_amplitude(const GaussianMeter &meter, double q);

/// Real-valued samples of a density on a uniform grid, x_i = x0 + i dx.
struct SampledDistribution {
    double x0 = 0.0;
    double dx = 1.0;
    Eigen::VectorXd values;

    double x(Eigen::Index i) const {
        return x0 + static_cast<double>(i) * dx;
    }
    Eigen::Index size() const {
        return values.size();
    }
    double mass() const;
    double mean() const;
    double variance() const;
};

/// Momentum-space amplitudes on p_k = p0 + k dp.
struct MomentumGrid {
    double p0 = 0.0;
    double dp = 1.0;
    CVector amplitudes;

    double p(Eigen::Index k) const {
        return p0 + static_cast<double>(k) * dp;
    }
};

/// Complex wavefunction sampled on a periodic position grid. Norm sum |psi|^2 dq = 1.
class GridMeter {
  public:
    GridMeter(double q0, double dq, CVector amplitudes);
    static GridMeter normalized(double q0, double dq, CVector amplitudes);

    double q0() const {
        return q0_;
    }
    double dq() const {
        return dq_;
    }
    double q(Eigen::Index i) const {
        return q0_ + static_cast<double>(i) * dq_;
    }
    Eigen::Index size() const {
        return amps_.size();
    }
    const CVector &amplitudes() const {
        return amps_;
    }

    SampledDistribution position_distribution() const;
    double mean_q() const;
    double variance_q() const;
    double mean_p() const;
    double variance_p() const;

  private:
    double q0_;
    double dq_;
    CVector amps_;
};

/// psi(p) = (2 pi)^{-1/2} sum_j dq exp(-i p q_j) psi(q_j). `pad` zero-extends the
/// position grid to refine the momentum spacing.
MomentumGrid to_momentum(const GridMeter &meter, int pad = 1);

/// Applies a function of P (multiplication in momentum space) and returns position amplitudes.
CVector apply_momentum_function(const GridMeter &meter, const std::function<cplx(double)> &f);
/// Same action on unnormalized samples laid out on the grid (q0, dq).
CVector apply_momentum_function(double q0, double dq, const CVector &amplitudes,
                                const std::function<cplx(double)> &f);

CVector momentum_times(const GridMeter &meter);
GridMeter displace(const GridMeter &meter, double shift);

/// Grid of `points` samples covering [mean_q - span, mean_q + span). Requires span >= 8 sigma.
GridMeter to_grid(const GaussianMeter &meter, double span, int points);

struct WignerMap {
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::MatrixXd values;  // rows follow q, columns follow p

    double integral() const;
    Eigen::VectorXd position_marginal() const;
    Eigen::VectorXd momentum_marginal() const;
};

struct WignerOptions {
    int q_stride = 1;
    double p_max = INFINITY;
};

WignerMap wigner(const GridMeter &meter, const WignerOptions &options = {});

/// Density of S = Q cos(theta) + P sin(theta).
SampledDistribution quadrature_marginal(const GridMeter &meter, double theta);

/// Angle maximizing g Re(w) cos(theta) + g Im(w) sin(theta) / (2 sigma^2).
double optimal_quadrature_angle(cplx weak_value, double sigma);

/// Largest quadrature shift attainable for a weak value in the linear-response regime.
double maximal_quadrature_shift(cplx weak_value, double g, double sigma);

int default_fock_cutoff(double mean_photons);

struct FockComponent {
    double weight;
    CVector coefficients;
};

/// Ensemble of pure number-basis states. Coherent inputs keep the truncated tail
/// mass so the cutoff can be validated.
class FockMeter {
  public:
    static FockMeter coherent(cplx alpha, std::optional<int> n_max = std::nullopt);
    static FockMeter mixture(const std::vector<std::pair<double, cplx>> &weighted_alphas,
                             std::optional<int> n_max = std::nullopt);
    static FockMeter pure(CVector coefficients);
    static FockMeter from_density(const CMatrix &rho);
    /// Weights must sum to 1 within 1e-10; each coefficient vector must be normalized and have n_max + 1 entries.
    static FockMeter ensemble(std::vector<FockComponent> components, double tail_mass = 0.0);

    int n_max() const {
        return n_max_;
    }
    const std::vector<FockComponent> &components() const {
        return components_;
    }
    double tail_mass() const {
        return tail_mass_;
    }
    bool is_pure() const {
        return components_.size() == 1;
    }
    CMatrix density() const;
    /// Throws TruncationTooTight when the discarded tail carries >= 1e-8 probability.
    void check_truncation() const;

  private:
    FockMeter(int n_max, std::vector<FockComponent> components, double tail_mass);

    int n_max_;
    std::vector<FockComponent> components_;
    double tail_mass_;
};

struct FockMoments {
    double mean;
    double variance;
};

FockMoments fock_moments(const FockMeter &meter);

/// Two-point coherent mixture at n = N +- sqrt(N^2/4 - N) with Var(n) = N^2 / 4. Requires N >= 4.
FockMeter quarter_variance_mixture(double mean_photons);

void write_csv(std::ostream &os, const GridMeter &meter);
void write_csv(std::ostream &os, const WignerMap &map);
void write_csv(std::ostream &os, const SampledDistribution &dist);
GridMeter read_grid_meter_csv(std::istream &is);

}  // namespace wvalab
