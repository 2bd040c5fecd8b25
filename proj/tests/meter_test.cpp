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

#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "wvalab/error.hpp"
#include "wvalab/meter.hpp"

using namespace wvalab;

namespace {

constexpr double kPi = std::numbers::pi;

GridMeter standard_grid(double sigma, double mean_q = 0.0, double mean_p = 0.0) {
    return to_grid(GaussianMeter(sigma, mean_q, mean_p), 16.0 * sigma, 4096);
}

}  // namespace

TEST(GaussianDensity, PeakNormalizationVariance) {
    GaussianMeter m(1.0);
    EXPECT_NEAR(gaussian_density(m, 0.0), 1.0 / std::sqrt(2.0 * kPi), 1e-15);
    GaussianMeter w(0.7, 0.3);
    double mass = 0.0, mean = 0.0, var = 0.0;
    const double dq = 1e-3;
    for (double q = -10.0; q <= 10.0; q += dq) {
        double d = gaussian_density(w, q) * dq;
        mass += d;
        mean += q * d;
    }
    for (double q = -10.0; q <= 10.0; q += dq) {
        var += (q - mean) * (q - mean) * gaussian_density(w, q) * dq;
    }
    EXPECT_NEAR(mass, 1.0, 1e-10);
    EXPECT_NEAR(mean, 0.3, 1e-10);
    EXPECT_NEAR(var, 0.49, 1e-10);
    EXPECT_THROW(GaussianMeter(0.0), Error);
}

TEST(ToGrid, NormMeanAndMomentumVariance) {
    auto g = to_grid(GaussianMeter(1.0), 16.0, 4096);
    EXPECT_NEAR(g.amplitudes().squaredNorm() * g.dq(), 1.0, 1e-12);
    auto shifted = to_grid(GaussianMeter(1.0, 0.37), 16.0, 4096);
    EXPECT_NEAR(shifted.mean_q(), 0.37, shifted.dq() / 10);
    EXPECT_NEAR(g.variance_p(), 0.25, 1e-6);
    EXPECT_NEAR(g.variance_q() * g.variance_p(), 0.25, 1e-8);
    auto narrow = standard_grid(std::sqrt(0.5));
    EXPECT_NEAR(narrow.variance_q() * narrow.variance_p(), 0.25, 1e-8);
}

TEST(ToGrid, Errors) {
    try {
        to_grid(GaussianMeter(1.0), 7.9, 4096);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientSpan);
    }
    EXPECT_THROW(to_grid(GaussianMeter(1.0), 16.0, 128), Error);
}

TEST(GridMeter, MomentumMeanFollowsKick) {
    auto g = standard_grid(0.8, 0.0, 0.9);
    EXPECT_NEAR(g.mean_p(), 0.9, 1e-9);
}

TEST(Fourier, ParsevalAndRoundTrip) {
    auto g = standard_grid(1.3, 0.4, -0.2);
    for (int pad : {1, 2, 4}) {
        auto m = to_momentum(g, pad);
        EXPECT_NEAR(m.amplitudes.squaredNorm() * m.dp, 1.0, 1e-10);
    }
    CVector same = apply_momentum_function(g, [](double) { return cplx(1.0); });
    EXPECT_NEAR((same - g.amplitudes()).norm() * std::sqrt(g.dq()), 0.0, 1e-12);
}

TEST(Fourier, AnalyticGaussianPair) {
    const double sigma = 0.9;
    auto g = standard_grid(sigma);
    auto m = to_momentum(g);
    // phi(p) = (2 sigma^2/pi)^(1/4) exp(-sigma^2 p^2), real and positive for a centred meter.
    double err = 0.0;
    for (Eigen::Index k = 0; k < m.amplitudes.size(); ++k) {
        double p = m.p(k);
        double exact = std::pow(2.0 * sigma * sigma / kPi, 0.25) * std::exp(-sigma * sigma * p * p);
        err = std::max(err, std::abs(m.amplitudes(k) - exact));
    }
    EXPECT_LT(err, 1e-10);
}

TEST(Fourier, DisplacementAndMomentumOperator) {
    auto g = standard_grid(1.0);
    auto d = displace(g, 0.75);
    EXPECT_NEAR(d.mean_q(), 0.75, 1e-10);
    EXPECT_NEAR(d.variance_q(), 1.0, 1e-9);
    // P acting on a real Gaussian: -i d/dq psi = i q/(2 sigma^2) psi.
    CVector pp = momentum_times(g);
    double err = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        cplx exact = cplx(0.0, g.q(j) / 2.0) * g.amplitudes()(j);
        err = std::max(err, std::abs(pp(j) - exact));
    }
    EXPECT_LT(err, 1e-9);
}

TEST(Wigner, GaussianPointwise) {
    const double sigma = std::sqrt(2.0) / 2.0;
    auto g = standard_grid(sigma);
    auto w = wigner(g, WignerOptions{8, 6.0});
    double err = 0.0;
    double peak = 0.0;
    for (Eigen::Index i = 0; i < w.q.size(); ++i) {
        for (Eigen::Index j = 0; j < w.p.size(); ++j) {
            double q = w.q(i), p = w.p(j);
            double exact = std::exp(-q * q / (2 * sigma * sigma)) * std::exp(-2 * sigma * sigma * p * p) / kPi;
            err = std::max(err, std::abs(w.values(i, j) - exact));
            if (std::abs(q) < 1e-12 && std::abs(p) < 1e-12) {
                peak = w.values(i, j);
            }
        }
    }
    EXPECT_LT(err, 1e-6);
    EXPECT_NEAR(peak, 1.0 / kPi, 1e-6);
}

TEST(Wigner, DisplacedGaussianTranslates) {
    const double sigma = 1.0;
    auto g = standard_grid(sigma, 1.5, -0.5);
    auto w = wigner(g, WignerOptions{4, 5.0});
    double err = 0.0;
    for (Eigen::Index i = 0; i < w.q.size(); ++i) {
        for (Eigen::Index j = 0; j < w.p.size(); ++j) {
            double q = w.q(i) - 1.5, p = w.p(j) + 0.5;
            double exact = std::exp(-q * q / (2 * sigma * sigma)) * std::exp(-2 * sigma * sigma * p * p) / kPi;
            err = std::max(err, std::abs(w.values(i, j) - exact));
        }
    }
    EXPECT_LT(err, 1e-6);
}

TEST(Wigner, IntegralAndMarginals) {
    // A non-Gaussian superposition exercises negative regions.
    const double sigma = 0.7;
    auto centred = standard_grid(sigma);
    auto a = displace(centred, -1.2);
    auto b = displace(centred, 1.2);
    auto cat = GridMeter::normalized(a.q0(), a.dq(), a.amplitudes() + cplx(0.0, 1.0) * b.amplitudes());
    auto w = wigner(cat);
    EXPECT_NEAR(w.integral(), 1.0, 1e-6);
    Eigen::VectorXd pm = w.position_marginal();
    Eigen::VectorXd dens = cat.amplitudes().cwiseAbs2();
    EXPECT_LT((pm - dens).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_GT(pm.minCoeff(), -1e-9);

    Eigen::VectorXd qm = w.momentum_marginal();
    auto mom = to_momentum(cat);
    for (Eigen::Index j = 0; j < w.p.size(); j += 7) {
        double p = w.p(j);
        if (std::abs(p) > 5.0) {
            continue;
        }
        // interpolate |phi(p)|^2 from the momentum grid
        double idx = (p - mom.p0) / mom.dp;
        auto k = static_cast<Eigen::Index>(std::floor(idx));
        double t = idx - static_cast<double>(k);
        double v = (1 - t) * std::norm(mom.amplitudes(k)) + t * std::norm(mom.amplitudes(k + 1));
        if (t < 1e-9) {
            EXPECT_NEAR(qm(j), v, 1e-6);
        }
    }
    EXPECT_GT(qm.minCoeff(), -1e-9);
    EXPECT_GT(-w.values.minCoeff(), 1e-3);
}

TEST(QuadratureMarginal, PositionAndMomentumLimits) {
    const double sigma = 0.8;
    auto g = standard_grid(sigma);
    auto d0 = quadrature_marginal(g, 0.0);
    EXPECT_NEAR(d0.mass(), 1.0, 1e-10);
    EXPECT_NEAR(d0.variance(), sigma * sigma, 1e-6);
    auto d1 = quadrature_marginal(g, kPi / 2);
    EXPECT_NEAR(d1.mass(), 1.0, 1e-10);
    EXPECT_NEAR(d1.variance(), 1.0 / (4 * sigma * sigma), 1e-6);
}

TEST(QuadratureMarginal, GeneralAngleMomentsAndDisplacementLinearity) {
    const double sigma = 0.6;
    const double q0 = 0.4, p0 = -0.3;
    auto base = standard_grid(sigma);
    auto moved = standard_grid(sigma, q0, p0);
    for (double theta : {0.3, 0.9, 1.4, 2.2, 3.0, -0.7, -2.0}) {
        double c = std::cos(theta), s = std::sin(theta);
        auto d = quadrature_marginal(moved, theta);
        EXPECT_NEAR(d.mass(), 1.0, 1e-9) << theta;
        EXPECT_NEAR(d.mean(), c * q0 + s * p0, 1e-8) << theta;
        EXPECT_NEAR(d.variance(), sigma * sigma * c * c + s * s / (4 * sigma * sigma), 1e-6) << theta;
        double mean0 = quadrature_marginal(base, theta).mean();
        EXPECT_NEAR(d.mean() - mean0, c * q0 + s * p0, 1e-8) << theta;
    }
    // Translating in q only shifts the mean by delta cos(theta).
    auto shifted = standard_grid(sigma, 0.25);
    for (double theta : {0.2, 1.2, 2.5}) {
        EXPECT_NEAR(quadrature_marginal(shifted, theta).mean() - quadrature_marginal(base, theta).mean(),
                    0.25 * std::cos(theta), 1e-8);
    }
}

TEST(QuadratureMarginal, OptimalAngleGivesMaximalShift) {
    const double sigma = std::sqrt(2.0) / 2.0;
    const double g = 1e-4 * sigma;
    const cplx w(100.0, -100.0);
    auto base = standard_grid(sigma);
    // exp(-i g w P) acting on the Gaussian: a q-displacement by g Re w and a momentum tilt.
    CVector tilted = apply_momentum_function(base, [&](double p) { return std::exp(cplx(0.0, -1.0) * g * w * p); });
    auto post = GridMeter::normalized(base.q0(), base.dq(), tilted);

    double theta = optimal_quadrature_angle(w, sigma);
    EXPECT_NEAR(theta, std::atan(std::tan(-kPi / 4) / (2 * sigma * sigma)), 1e-12);
    double best = quadrature_marginal(post, theta).mean();
    double expected = g * std::abs(w) * std::sqrt(0.5 + 0.5 / (4 * std::pow(sigma, 4)));
    EXPECT_NEAR(best, expected, 1e-6 * expected);
    EXPECT_NEAR(maximal_quadrature_shift(w, g, sigma), expected, 1e-15);
    for (double dt : {-0.2, -0.05, 0.05, 0.2}) {
        EXPECT_LT(quadrature_marginal(post, theta + dt).mean(), best);
    }
}

TEST(OptimalQuadratureAngle, Limits) {
    EXPECT_NEAR(optimal_quadrature_angle(cplx(5.0, 0.0), 1.0), 0.0, 1e-15);
    EXPECT_NEAR(optimal_quadrature_angle(cplx(0.0, 5.0), 1.0), kPi / 2, 1e-15);
    EXPECT_NEAR(optimal_quadrature_angle(cplx(0.0, -5.0), 1.0), -kPi / 2, 1e-15);
    EXPECT_NEAR(optimal_quadrature_angle(cplx(-5.0, 0.0), 1.0), kPi, 1e-15);
}

TEST(Fock, CoherentMoments) {
    auto c = FockMeter::coherent(cplx(3.0, 0.0));
    auto m = fock_moments(c);
    EXPECT_NEAR(m.mean, 9.0, 1e-9);
    EXPECT_NEAR(m.variance, 9.0, 1e-9);
    EXPECT_LT(c.tail_mass(), 1e-8);
    auto big = FockMeter::coherent(std::polar(100.0, 0.3));
    auto mb = fock_moments(big);
    EXPECT_NEAR(mb.mean, 1e4, 1e-6);
    EXPECT_NEAR(mb.variance, 1e4, 1e-4);
}

TEST(Fock, VacuumAndTruncation) {
    auto v = FockMeter::coherent(cplx(0.0));
    auto m = fock_moments(v);
    EXPECT_EQ(m.mean, 0.0);
    EXPECT_EQ(m.variance, 0.0);
    auto tight = FockMeter::coherent(cplx(3.0), 10);
    try {
        fock_moments(tight);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::TruncationTooTight);
    }
}

TEST(Fock, MixtureVariances) {
    const double nbar = 50.0;
    auto m = FockMeter::mixture({{0.5, cplx(0.0)}, {0.5, cplx(std::sqrt(2 * nbar))}});
    auto mm = fock_moments(m);
    EXPECT_NEAR(mm.mean, nbar, 1e-8);
    EXPECT_NEAR(mm.variance, nbar * nbar + nbar, 1e-6);

    for (double n : {16.0, 100.0, 400.0}) {
        auto q = quarter_variance_mixture(n);
        auto qm = fock_moments(q);
        EXPECT_NEAR(qm.mean, n, 1e-8 * n);
        EXPECT_NEAR(qm.variance, n * n / 4, 1e-8 * n * n);
        EXPECT_FALSE(q.is_pure());
    }
    EXPECT_THROW(FockMeter::mixture({{0.6, cplx(1.0)}, {0.6, cplx(2.0)}}), Error);
}

TEST(Fock, DensityRoundTrip) {
    auto m = FockMeter::mixture({{0.3, cplx(1.0)}, {0.7, cplx(0.0, 2.0)}});
    CMatrix rho = m.density();
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
    auto back = FockMeter::from_density(rho);
    EXPECT_NEAR((back.density() - rho).norm(), 0.0, 1e-12);
    auto a = fock_moments(m), b = fock_moments(back);
    EXPECT_NEAR(a.mean, b.mean, 1e-10);
    EXPECT_NEAR(a.variance, b.variance, 1e-10);
}

TEST(Csv, GridMeterRoundTrip) {
    auto g = standard_grid(1.1, 0.2, 0.3);
    std::stringstream ss;
    write_csv(ss, g);
    auto back = read_grid_meter_csv(ss);
    EXPECT_EQ(back.size(), g.size());
    EXPECT_NEAR(back.dq(), g.dq(), 1e-12);
    EXPECT_EQ((back.amplitudes() - g.amplitudes()).norm(), 0.0);
    std::stringstream bad("x,y\n1,2\n");
    EXPECT_THROW(read_grid_meter_csv(bad), Error);
}
