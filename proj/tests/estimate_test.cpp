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
#include <complex>
#include <random>

#include <boost/math/distributions/binomial.hpp>
#include <gtest/gtest.h>

#include "wvalab/error.hpp"
#include "wvalab/estimate.hpp"

using namespace wvalab;

namespace {

SampledDistribution gaussian_grid(double mu, double sigma, int n = 2001) {
    SampledDistribution d;
    d.dx = 16.0 * sigma / (n - 1);
    d.x0 = mu - 8.0 * sigma;
    d.values.resize(n);
    for (int i = 0; i < n; ++i) {
        const double z = (d.x(i) - mu) / sigma;
        d.values(i) = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    }
    return d;
}

double sample_var(const std::vector<double> &x) {
    double m = 0.0;
    for (double v : x) {
        m += v;
    }
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST(Sample, GaussianMeanAndReproducibility) {
    const SampledDistribution d = gaussian_grid(0.7, 2.0);
    const std::vector<double> x = sample(d, 100000, std::uint64_t{11});
    double m = 0.0;
    for (double v : x) {
        m += v;
    }
    m /= 1e5;
    EXPECT_NEAR(m, 0.7, 5.0 * 2.0 / std::sqrt(1e5));
    EXPECT_NEAR(sample_var(x), 4.0, 0.05);
    EXPECT_EQ(x, sample(d, 100000, std::uint64_t{11}));
    EXPECT_NE(x, sample(d, 100000, std::uint64_t{12}));
}

TEST(Sample, BinaryWithinExactBinomialInterval) {
    Eigen::VectorXd w(2);
    w << 0.7, 0.3;
    const std::size_t n = 200000;
    std::vector<Eigen::Index> k = sample_discrete(w, n, 5);
    const double hits = static_cast<double>(std::count(k.begin(), k.end(), Eigen::Index{1}));
    using boost::math::binomial_distribution;
    const double lo = binomial_distribution<>::find_lower_bound_on_p(static_cast<double>(n), hits, 0.0005);
    const double hi = binomial_distribution<>::find_upper_bound_on_p(static_cast<double>(n), hits, 0.0005);
    EXPECT_LE(lo, 0.3);
    EXPECT_GE(hi, 0.3);
}

TEST(Sample, AliasTableFrequencies) {
    Eigen::VectorXd w(5);
    w << 1.0, 0.0, 3.0, 2.0, 4.0;
    std::vector<Eigen::Index> k = sample_discrete(w, 100000, 9);
    for (Eigen::Index c = 0; c < 5; ++c) {
        const double f = static_cast<double>(std::count(k.begin(), k.end(), c)) / 1e5;
        const double p = w(c) / 10.0;
        EXPECT_NEAR(f, p, 5.0 * std::sqrt(p * (1.0 - p) / 1e5) + 1e-12);
    }
    EXPECT_THROW(AliasTable(Eigen::VectorXd::Zero(3)), Error);
}

TEST(Amr, NoiselessAndWeakValueCalibration) {
    const std::vector<double> x = sample(gaussian_grid(0.25, 1.0), 40000, std::uint64_t{3});
    EXPECT_NEAR(amr_estimate(x, 1.0), 0.25, 5.0 / 200.0);
    // Linear response: ⟨q⟩_f ≈ g Re w.
    StandardSpec spec{WeakValueKind::Real, 1e-3, 0.1, 1.0};
    const double w = 1.0 / std::tan(0.05);
    const std::vector<double> y = sample(standard_readout(spec, spec.g), 200000, std::uint64_t{4});
    EXPECT_NEAR(amr_estimate(y, w), 1e-3, 5.0 / (w * std::sqrt(2e5)));
    EXPECT_THROW(amr_estimate(y, 0.0), Error);
}

TEST(Amr, SlowNoiseVarianceSaturates) {
    CorrelatedNoiseModel m{1.0, 0.5, 1.0, 1e7, 10000};
    const double cal = 2.0;
    std::vector<double> est;
    for (int t = 0; t < 400; ++t) {
        std::mt19937_64 rng = trial_stream(21, static_cast<std::uint64_t>(t));
        est.push_back(amr_estimate(sample_noise(m, rng), cal));
    }
    // Var = 1ᵀC1/(N² cal²) → (a/N + c)/cal².
    EXPECT_NEAR(sample_var(est) / ((1e-4 + 0.5) / (cal * cal)), 1.0, 3.0 * std::sqrt(2.0 / 399.0));
}

TEST(MleCorrelated, WhiteNoiseEqualsAmrBitwise) {
    const std::vector<double> x = sample(gaussian_grid(1.0, 1.0), 257, std::uint64_t{8});
    Eigen::Map<const Eigen::VectorXd> v(x.data(), 257);
    const double mle = mle_correlated(v, 3.0 * Eigen::MatrixXd::Identity(257, 257));
    EXPECT_EQ(mle, amr_estimate(x, 1.0));
}

TEST(MleCorrelated, WeightsSumToOne) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd b(30, 30);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            b.data()[i] = n01(rng);
        }
        Eigen::MatrixXd c = b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(30, 30);
        EXPECT_NEAR(gls_weights(c).sum(), 1.0, 1e-12);
    }
}

TEST(MleCorrelated, UniformIffExchangeable) {
    Eigen::MatrixXd ex = Eigen::MatrixXd::Constant(6, 6, 0.4);
    ex.diagonal().array() = 1.5;
    Eigen::VectorXd w = gls_weights(ex);
    EXPECT_TRUE((w.array() == 1.0 / 6.0).all());
    // Symmetric but non-exchangeable: the ends of an AR(1) record carry more weight.
    Eigen::MatrixXd ar = covariance(CorrelatedNoiseModel{0.2, 1.0, 1.0, 2.0, 6});
    Eigen::VectorXd v = gls_weights(ar);
    EXPECT_GT(v(0), v(2) + 1e-3);
    EXPECT_NEAR(v(0), v(5), 1e-12);
    EXPECT_NEAR(v(1), v(4), 1e-12);
    // Direct dense solve as an independent route.
    Eigen::VectorXd direct = ar.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(6));
    EXPECT_LT((v - direct / direct.sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MleCorrelated, SingularCovariance) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Ones(4, 4);
    c(0, 1) = c(1, 0) = 1.5;
    try {
        gls_weights(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularCovariance);
    }
}

TEST(MleCorrelated, VarianceMatchesInverseInformation) {
    CorrelatedNoiseModel m{1.0, 1.0, 1.0, 50.0, 1000};
    const Eigen::MatrixXd c = covariance(m);
    const Eigen::VectorXd w = gls_weights(c);
    const double info = c.llt().solve(Eigen::VectorXd::Ones(1000)).sum();
    std::vector<double> gls, amr;
    for (int t = 0; t < 400; ++t) {
        std::mt19937_64 rng = trial_stream(33, static_cast<std::uint64_t>(t));
        const Eigen::VectorXd x = sample_noise(m, rng);
        gls.push_back(mle_correlated_weighted(x, w));
        amr.push_back(amr_estimate(x, 1.0));
    }
    const double tol = 3.0 * std::sqrt(2.0 / 399.0);
    EXPECT_NEAR(sample_var(gls) * info, 1.0, tol);
    const double amr_var = c.sum() / 1e6;
    EXPECT_NEAR(sample_var(amr) / amr_var, 1.0, tol);
    EXPECT_GE(amr_var * info, 1.0);
}

TEST(MleGrid, GaussianLocationMatchesMean) {
    const std::vector<double> x = sample(gaussian_grid(0.3, 1.0), 5000, std::uint64_t{2});
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(41, 0.0, 0.6);
    GridMle r = mle_grid(x, [](double v, double g) { return -0.5 * (v - g) * (v - g); }, grid);
    // Quadratic log-likelihood: the parabola is exact.
    EXPECT_NEAR(r.estimate, amr_estimate(x, 1.0), 1e-10);
}

TEST(MleGrid, Errors) {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
    try {
        mle_grid([](double g) { return g; }, grid);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::BoundaryMaximum);
    }
    try {
        mle_grid([](double) { return 1.0; }, grid);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::FlatLikelihood);
    }
}

TEST(MleGrid, SelectionStatisticsOnly) {
    // Coherent meter, n̄ = 100: p_f(g) = ½[1 − Re e^{iε} exp(n̄(e^{ig} − 1))].
    const double nbar = 100.0, eps = 0.1, g0 = 1e-3;
    auto pf = [&](double g) {
        return 0.5 * (1.0 - (std::polar(1.0, eps) * std::exp(nbar * (std::polar(1.0, g) - 1.0))).real());
    };
    const double h = 1e-6;
    const double dp = (pf(g0 + h) - pf(g0 - h)) / (2.0 * h);
    const double f_p = dp * dp / (pf(g0) * (1.0 - pf(g0)));
    EXPECT_NEAR(f_p / (nbar * nbar), 1.0, 0.05);
    const int nu = 10000;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(81, g0 - 8e-3 / std::sqrt(nu * 1.0) * 10.0,
                                                            g0 + 8e-3 / std::sqrt(nu * 1.0) * 10.0);
    std::vector<double> est;
    for (int t = 0; t < 200; ++t) {
        std::mt19937_64 rng = trial_stream(44, static_cast<std::uint64_t>(t));
        const double k = std::binomial_distribution<int>(nu, pf(g0))(rng);
        est.push_back(mle_grid([&](double g) { return k * std::log(pf(g)) + (nu - k) * std::log1p(-pf(g)); }, grid)
                          .estimate);
    }
    EXPECT_NEAR(sample_var(est) * nu * f_p, 1.0, 3.0 * std::sqrt(2.0 / 199.0));
}

TEST(Jackknife, MatchesBruteForce) {
    std::vector<double> x{0.3, -1.2, 2.5, 0.7, 0.1, -0.4, 1.9};
    VarianceEstimate v = jackknife_variance(x);
    EXPECT_NEAR(v.variance, sample_var(x), 1e-14);
    std::vector<double> loo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> y = x;
        y.erase(y.begin() + static_cast<long>(i));
        loo.push_back(sample_var(y));
    }
    double m = 0.0;
    for (double v2 : loo) {
        m += v2;
    }
    m /= 7.0;
    double acc = 0.0;
    for (double v2 : loo) {
        acc += (v2 - m) * (v2 - m);
    }
    EXPECT_NEAR(v.jackknife_se, std::sqrt(6.0 / 7.0 * acc), 1e-14);
}

TEST(Experiment, ReproducibleAndUnbiasedAtZero) {
    ExperimentPlan p;
    p.scheme = {WeakValueKind::Real, 0.0, 0.1, 1.0};
    p.nu = 2000;
    p.trials = 100;
    EstimateReport a = run_experiment(p);
    EstimateReport b = run_experiment(p);
    EXPECT_EQ(a.estimates, b.estimates);
    EXPECT_EQ(a.crb_ratio, b.crb_ratio);
    EXPECT_NEAR(a.mean_estimate, 0.0, 4.0 * a.standard_error);
    p.seed = 7;
    EXPECT_NE(run_experiment(p).estimates, a.estimates);
}

TEST(Experiment, CramerRaoSaturation) {
    for (Estimator e : {Estimator::AMR, Estimator::MLE_Grid}) {
        for (WeakValueKind k : {WeakValueKind::Real, WeakValueKind::Imaginary}) {
            ExperimentPlan p;
            p.scheme = {k, 1e-3, 0.1, 1.0};
            p.estimator = e;
            p.seed = 99;
            EstimateReport r = run_experiment(p);
            EXPECT_NEAR(r.crb_ratio, 1.0, 3.0 * r.crb_ratio_se) << to_string(e) << " " << to_string(k);
            EXPECT_NEAR(r.mean_estimate, 1e-3, 4.0 * r.standard_error);
            EXPECT_GE(r.empirical_variance, 0.0);
        }
    }
}

TEST(Experiment, SlowNoise) {
    ExperimentPlan p;
    p.scheme = {WeakValueKind::Real, 1e-3, 0.1, 1.0};
    p.nu = 1000;
    p.noise = CorrelatedNoiseModel{1.0, 1.0, 1.0, 200.0, 1};
    p.estimator = Estimator::MLE_Correlated;
    EstimateReport gls = run_experiment(p);
    EXPECT_NEAR(gls.crb_ratio, 1.0, 3.0 * gls.crb_ratio_se);
    p.estimator = Estimator::AMR;
    EstimateReport amr = run_experiment(p);
    // AMR efficiency loss: (1ᵀC1/N²)(1ᵀC⁻¹1) for the total covariance.
    CorrelatedNoiseModel m = *p.noise;
    m.n = p.nu;
    Eigen::MatrixXd c = covariance(m);
    const SampledDistribution d = standard_readout(p.scheme, p.scheme.g);
    double var_x = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        var_x += d.values(i) * d.dx * std::pow(d.x(i) - d.mean(), 2);
    }
    c.diagonal().array() += var_x;
    const double expected = c.sum() / 1e6 * c.llt().solve(Eigen::VectorXd::Ones(1000)).sum();
    EXPECT_GT(expected, 1.0);
    EXPECT_NEAR(amr.crb_ratio, expected, 3.0 * amr.crb_ratio_se);
    p.estimator = Estimator::MLE_Grid;
    EXPECT_THROW(run_experiment(p), Error);
}

TEST(Experiment, PlanValidation) {
    ExperimentPlan p;
    p.nu = 0;
    EXPECT_THROW(run_experiment(p), Error);
    p.nu = 10;
    p.trials = 1;
    EXPECT_THROW(run_experiment(p), Error);
    EXPECT_EQ(estimator_from_string("MLE_Grid"), Estimator::MLE_Grid);
    EXPECT_THROW(estimator_from_string("mle"), Error);
}
