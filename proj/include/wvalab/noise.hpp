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
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "wvalab/coupling.hpp"
#include "wvalab/meter.hpp"

namespace wvalab {

// Time-correlated noise: C_kl = a δ_kl + c exp(−|k − l| dt / tau_c).

struct CorrelatedNoiseModel {
    double a = 1.0;
    double c = 0.0;
    double dt = 1.0;
    double tau_c = 1.0;
    long n = 1;

    void validate() const;
    /// Lag-one correlation exp(−dt/tau_c).
    double rho() const;
};

Eigen::MatrixXd covariance(const CorrelatedNoiseModel &model);

/// Σ_kl [C⁻¹]_kl from a Cholesky factorization.
double cm_fisher_correlated(const CorrelatedNoiseModel &model);

enum class NoiseRegime { White, SlowDecorrelated, SlowCorrelated };

const char *to_string(NoiseRegime regime);

/// White if tau_c/dt <= 1; otherwise SlowDecorrelated if p_f < dt/tau_c, else SlowCorrelated.
NoiseRegime classify_noise_regime(const CorrelatedNoiseModel &model, double p_f);

struct AmrScheme {
    enum class Kind { CM, WVA } kind = Kind::CM;
    double p_f = 1.0;
    double weak_value = 1.0;

    static AmrScheme cm();
    static AmrScheme wva(double p_f, double weak_value);
    /// Real WVA on the optimal trade-off p_f·w² = 1.
    static AmrScheme wva_tradeoff(double p_f);
};

/// Closed forms per regime: CM gives N/(a+c) or N/(a+Nc); WVA gives w²p_fN/(a+c) or w²p_fN/(a+p_fNc).
double amr_information(const CorrelatedNoiseModel &model, const AmrScheme &scheme);

/// Inverse variance of the plain average, from exact lag sums. For WVA the kept samples are a
/// Bernoulli(p_f) thinning of the record and the pair sum is averaged over the thinning.
double amr_information_numeric(const CorrelatedNoiseModel &model, const AmrScheme &scheme);

/// One noise record with covariance(model), drawn by an AR(1) recursion.
Eigen::VectorXd sample_noise(const CorrelatedNoiseModel &model, std::mt19937_64 &rng);

void write_csv(std::ostream &os, const Eigen::MatrixXd &matrix);

// Beam jitter.

struct BeamGeometry {
    double k0 = 1.0;
    double l1 = 1.0;
    double l2 = 1.0;
    double f = 1.0;
    double sigma = 1.0;
    double photons = 1.0;

    void validate() const;
    /// (l1 + l2)/(2 k0 σ²).
    double diffraction_factor() const;
};

enum class JitterCase { AngularB0, DisplacementQ0, DetectorD0 };
enum class JitterScheme { CM, ImaginaryWVA };

double jitter_fisher(JitterCase which, const BeamGeometry &geometry, double noise_std, JitterScheme scheme);

// Pixelation. Pixel n covers [(n − 1/2) r + h, (n + 1/2) r + h).

struct PixelatedDetector {
    double r = 1.0;
    double h = 0.0;

    PixelatedDetector() = default;
    PixelatedDetector(double r, double h);
    long pixel_of(double x) const;
    double left_edge(long n) const;
};

struct PixelDistribution {
    long first = 0;
    Eigen::VectorXd masses;

    long last() const {
        return first + static_cast<long>(masses.size()) - 1;
    }
};

/// Integrates a piecewise-constant density (one cell per sample) over pixels.
/// Throws ResolutionTooCoarse when dx > r/8.
PixelDistribution pixelate(const SampledDistribution &dist, const PixelatedDetector &det);

/// Density at x by linear interpolation between samples; 0 outside the sampled range.
double interpolate_density(const SampledDistribution &dist, double x);

/// FI about a translation of `dist`, unpixelated: ∫ P′²/P.
double location_fisher(const SampledDistribution &dist);

/// FI about a translation of `dist` read out through the pixels.
double pixelated_location_fisher(const SampledDistribution &dist, const PixelatedDetector &det);

/// α = pixelated / unpixelated translation FI.
double pixel_information_ratio(const SampledDistribution &dist, const PixelatedDetector &det);

enum class PixelScheme { RealWVA, ImaginaryWVA };

struct PixelRatioReport {
    double ratio;       // p_f F(pixelated WVA) / F(pixelated CM)
    double p_f;
    double f_wva;       // FI of the pixelated conditioned meter
    double f_cm;        // FI of the pixelated unselected meter shifted by g·λ_max
    double alpha_q;     // pixel ratio of a width-σ Gaussian
    double alpha_p;     // pixel ratio of a width-1/(2σ) Gaussian
};

/// Grid simulation of both readouts with one detector (same r and h). The real scheme reads
/// position, the imaginary scheme reads momentum, and the CM reference always reads position.
PixelRatioReport pixelated_fisher_ratio(PixelScheme scheme, double g, double sigma, const PixelatedDetector &det,
                                        const SystemState &pre, const SystemState &post, const Observable &A);

// Saturating detectors.

struct SaturatingDetector {
    long k_s = 1;
    double eta = 1.0;
    double readout_sigma = 0.0;
    double quantization = 1.0;

    void validate() const;
};

/// Sparse response row: probabilities for k = first .. first + size − 1.
struct ResponseRow {
    long first = 0;
    Eigen::VectorXd values;
};

ResponseRow response_row(const SaturatingDetector &det, long n_in);

/// Dense R(k | N) for k = 0 .. k_s.
Eigen::VectorXd saturating_response(const SaturatingDetector &det, long n_in);

/// Measured response loaded from CSV: rows are input photon numbers 0..rows−1, columns readout counts.
class ResponseMatrix {
  public:
    explicit ResponseMatrix(Eigen::MatrixXd matrix);
    static ResponseMatrix from_model(const SaturatingDetector &det, long n_max);
    static ResponseMatrix read_csv(std::istream &is);
    void write_csv(std::ostream &os) const;

    long max_input() const {
        return static_cast<long>(m_.rows()) - 1;
    }
    long max_count() const {
        return static_cast<long>(m_.cols()) - 1;
    }
    ResponseRow row(long n_in) const;
    const Eigen::MatrixXd &matrix() const {
        return m_;
    }

  private:
    Eigen::MatrixXd m_;
};

/// Mean photon number per pixel and its g-derivative.
struct PixelProfile {
    std::function<Eigen::VectorXd(double)> nbar;
    std::function<Eigen::VectorXd(double)> dnbar;
};

/// Gaussian beam of `photons` and width σ whose centre moves by `slope`·g, on pixels first..last.
PixelProfile gaussian_pixel_profile(double photons, double sigma, double slope, const PixelatedDetector &det,
                                    long first, long last);

struct SaturatedFisherReport {
    double fi;
    double ideal_fi;              // Σ η (dn̄/dg)²/n̄
    std::vector<double> pixel_fi;
    std::vector<double> gamma;    // pixel FI / [(η/n̄)(dn̄/dg)²]; NaN where dn̄/dg = 0
};

using ResponseFn = std::function<ResponseRow(long)>;

SaturatedFisherReport saturated_fisher(const PixelProfile &profile, double g, const SaturatingDetector &det);
SaturatedFisherReport saturated_fisher(const PixelProfile &profile, double g, double eta, const ResponseFn &response);

}  // namespace wvalab
