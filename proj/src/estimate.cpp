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

#include "wvalab/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wvalab/error.hpp"

namespace wvalab {

std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

std::vector<double> sample(const SampledDistribution &dist, std::size_t nu, std::mt19937_64 &rng) {
    const Eigen::Index n = dist.size();
    if (n == 0 || !(dist.dx > 0.0)) {
        fail(ErrorCode::InvalidArgument, "cannot sample an empty distribution");
    }
    std::vector<double> cdf(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (dist.values(i) < 0.0 || !std::isfinite(dist.values(i))) {
            fail(ErrorCode::InvalidArgument, "density must be finite and non-negative");
        }
        acc += dist.values(i);
        cdf[static_cast<std::size_t>(i)] = acc;
    }
    if (!(acc > 0.0)) {
        fail(ErrorCode::InvalidArgument, "density has zero mass");
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> out(nu);
    for (double &x : out) {
        const double u = u01(rng) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) {
            --it;
        }
        const auto k = static_cast<Eigen::Index>(it - cdf.begin());
        const double lo = k == 0 ? 0.0 : cdf[static_cast<std::size_t>(k - 1)];
        const double frac = dist.values(k) > 0.0 ? (u - lo) / dist.values(k) : 0.5;
        // Cell k is centred on x(k).
        x = dist.x(k) + (std::clamp(frac, 0.0, 1.0) - 0.5) * dist.dx;
    }
    return out;
}

std::vector<double> sample(const SampledDistribution &dist, std::size_t nu, std::uint64_t seed) {
    std::mt19937_64 rng = trial_stream(seed, 0);
    return sample(dist, nu, rng);
}

AliasTable::AliasTable(const Eigen::VectorXd &weights) {
    const Eigen::Index n = weights.size();
    if (n == 0) {
        fail(ErrorCode::InvalidArgument, "alias table needs at least one weight");
    }
    if ((weights.array() < 0.0).any() || !weights.allFinite()) {
        fail(ErrorCode::InvalidArgument, "weights must be finite and non-negative");
    }
    const double total = weights.sum();
    if (!(total > 0.0)) {
        fail(ErrorCode::InvalidArgument, "weights sum to zero");
    }
    prob_.assign(static_cast<std::size_t>(n), 1.0);
    alias_.resize(static_cast<std::size_t>(n));
    std::iota(alias_.begin(), alias_.end(), Eigen::Index{0});
    std::vector<double> scaled(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> small, large;
    for (Eigen::Index i = 0; i < n; ++i) {
        scaled[static_cast<std::size_t>(i)] = weights(i) * static_cast<double>(n) / total;
        (scaled[static_cast<std::size_t>(i)] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
        const Eigen::Index s = small.back();
        small.pop_back();
        const Eigen::Index l = large.back();
        prob_[static_cast<std::size_t>(s)] = scaled[static_cast<std::size_t>(s)];
        alias_[static_cast<std::size_t>(s)] = l;
        scaled[static_cast<std::size_t>(l)] -= 1.0 - scaled[static_cast<std::size_t>(s)];
        if (scaled[static_cast<std::size_t>(l)] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
}

Eigen::Index AliasTable::draw(std::mt19937_64 &rng) const {
    std::uniform_int_distribution<Eigen::Index> pick(0, size() - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Eigen::Index i = pick(rng);
    return u01(rng) < prob_[static_cast<std::size_t>(i)] ? i : alias_[static_cast<std::size_t>(i)];
}

std::vector<Eigen::Index> sample_discrete(const Eigen::VectorXd &weights, std::size_t nu, std::uint64_t seed) {
    AliasTable table(weights);
    std::mt19937_64 rng = trial_stream(seed, 0);
    std::vector<Eigen::Index> out(nu);
    for (auto &k : out) {
        k = table.draw(rng);
    }
    return out;
}

double amr_estimate(const std::vector<double> &samples, double calibration) {
    return amr_estimate(Eigen::Map<const Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size())),
                        calibration);
}

double amr_estimate(const Eigen::VectorXd &samples, double calibration) {
    if (calibration == 0.0 || !std::isfinite(calibration)) {
        fail(ErrorCode::InvalidArgument, "calibration must be finite and nonzero");
    }
    if (samples.size() == 0) {
        fail(ErrorCode::InvalidArgument, "no samples");
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < samples.size(); ++k) {
        sum += samples(k);
    }
    return sum / static_cast<double>(samples.size()) / calibration;
}

namespace {

bool exchangeable(const Eigen::MatrixXd &c) {
    const Eigen::Index n = c.rows();
    const double d = c(0, 0);
    const double o = n > 1 ? c(0, 1) : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (c(i, j) != (i == j ? d : o)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

Eigen::VectorXd gls_weights(const Eigen::MatrixXd &cov) {
    const Eigen::Index n = cov.rows();
    if (n == 0 || cov.cols() != n) {
        fail(ErrorCode::InvalidArgument, "covariance must be square and non-empty");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        fail(ErrorCode::SingularCovariance, "covariance is not positive definite");
    }
    if (exchangeable(cov)) {
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
    Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(n));
    const double s = w.sum();
    if (!(s > 0.0) || !w.allFinite()) {
        fail(ErrorCode::SingularCovariance, "covariance is numerically singular");
    }
    return w / s;
}

double mle_correlated_weighted(const Eigen::VectorXd &samples, const Eigen::VectorXd &weights) {
    if (samples.size() != weights.size()) {
        fail(ErrorCode::InvalidArgument, "sample and weight lengths differ");
    }
    const double first = weights(0);
    if ((weights.array() == first).all()) {
        return amr_estimate(samples, 1.0);
    }
    return weights.dot(samples);
}

double mle_correlated(const Eigen::VectorXd &samples, const Eigen::MatrixXd &cov) {
    if (samples.size() != cov.rows()) {
        fail(ErrorCode::InvalidArgument, "sample length does not match covariance");
    }
    return mle_correlated_weighted(samples, gls_weights(cov));
}

GridMle mle_grid(const std::function<double(double)> &loglik, const Eigen::VectorXd &g_grid) {
    const Eigen::Index n = g_grid.size();
    if (n < 3) {
        fail(ErrorCode::InvalidArgument, "g grid needs at least three points");
    }
    Eigen::VectorXd ll(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ll(i) = loglik(g_grid(i));
    }
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (ll(i) > ll(k) || std::isnan(ll(k))) {
            k = i;
        }
    }
    if (!std::isfinite(ll(k))) {
        fail(ErrorCode::FlatLikelihood, "log-likelihood is nowhere finite");
    }
    if ((ll.array() == ll(k)).all()) {
        fail(ErrorCode::FlatLikelihood, "log-likelihood is constant over the grid");
    }
    if (k == 0 || k == n - 1) {
        fail(ErrorCode::BoundaryMaximum, "likelihood maximum sits on the grid edge");
    }
    const double x0 = g_grid(k - 1), x1 = g_grid(k), x2 = g_grid(k + 1);
    const double y0 = ll(k - 1), y1 = ll(k), y2 = ll(k + 1);
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double curv = (d12 - d01) / (x2 - x0);
    double est = x1;
    if (curv < 0.0 && std::isfinite(curv)) {
        est = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
        est = std::clamp(est, x0, x2);
    }
    return {est, k, y1};
}

GridMle mle_grid(const std::vector<double> &samples, const std::function<double(double x, double g)> &log_density,
                 const Eigen::VectorXd &g_grid) {
    return mle_grid(
        [&](double g) {
            double s = 0.0;
            for (double x : samples) {
                s += log_density(x, g);
            }
            return s;
        },
        g_grid);
}

const char *to_string(Estimator e) {
    switch (e) {
    case Estimator::AMR:
        return "AMR";
    case Estimator::MLE_Correlated:
        return "MLE_Correlated";
    case Estimator::MLE_Grid:
        return "MLE_Grid";
    }
    return "?";
}

Estimator estimator_from_string(const std::string &name) {
    for (Estimator e : {Estimator::AMR, Estimator::MLE_Correlated, Estimator::MLE_Grid}) {
        if (name == to_string(e)) {
            return e;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown estimator '" + name + "'");
}

void ExperimentPlan::validate() const {
    if (nu < 1) {
        fail(ErrorCode::InvalidArgument, "nu must be >= 1");
    }
    if (trials < 2) {
        fail(ErrorCode::InvalidArgument, "trials must be >= 2 for a variance estimate");
    }
    if (estimator == Estimator::MLE_Grid && grid_points < 3) {
        fail(ErrorCode::InvalidArgument, "MLE grid needs at least three points");
    }
    if (estimator == Estimator::MLE_Grid && noise) {
        fail(ErrorCode::UnsupportedCombination, "MLE_Grid assumes i.i.d. readout; use MLE_Correlated with noise");
    }
    if (noise) {
        CorrelatedNoiseModel m = *noise;
        m.n = nu;
        m.validate();
    }
}

VarianceEstimate jackknife_variance(const std::vector<double> &x) {
    const std::size_t n = x.size();
    if (n < 3) {
        fail(ErrorCode::InvalidArgument, "jackknife needs at least three values");
    }
    const double dn = static_cast<double>(n);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / dn;
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mean) * (v - mean);
    }
    const double var = ss / (dn - 1.0);
    // Leave-one-out: SS_i = SS − n/(n−1)(x_i − mean)².
    std::vector<double> loo(n);
    double loo_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        loo[i] = (ss - dn / (dn - 1.0) * d * d) / (dn - 2.0);
        loo_mean += loo[i];
    }
    loo_mean /= dn;
    double acc = 0.0;
    for (double v : loo) {
        acc += (v - loo_mean) * (v - loo_mean);
    }
    return {mean, var, std::sqrt((dn - 1.0) / dn * acc)};
}

EstimateReport run_experiment(const ExperimentPlan &plan) {
    plan.validate();
    const StandardSpec &spec = plan.scheme;
    const double g = spec.g;
    const bool real = spec.kind == WeakValueKind::Real;
    const StandardResult sr = standard_scheme(spec);
    const SampledDistribution readout = standard_readout(spec, g);
    const double f_sample = sr.report.fisher / sr.report.p_f;

    // Readout mean slope from the closed-form conditioned shifts.
    const double h = 1e-4 * std::max(std::abs(g), 1e-3 * spec.sigma / std::max(1.0, std::abs(sr.weak_value)));
    auto mean_of = [&](double gg) {
        Shifts s = exact_shifts(sr.weak_value, gg, spec.sigma);
        return real ? s.q : s.p;
    };
    const double slope = (mean_of(g + h) - mean_of(g - h)) / (2.0 * h);
    const double offset = mean_of(g) - slope * g;

    EstimateReport rep;
    rep.true_value = g;
    rep.calibration = slope;
    const auto nu = static_cast<std::size_t>(plan.nu);

    Eigen::MatrixXd cov;
    Eigen::VectorXd weights;
    std::optional<CorrelatedNoiseModel> noise;
    if (plan.noise) {
        noise = *plan.noise;
        noise->n = plan.nu;
        cov = covariance(*noise);
        double var_x = 0.0;
        const double m = readout.mean();
        for (Eigen::Index i = 0; i < readout.size(); ++i) {
            var_x += readout.values(i) * readout.dx * (readout.x(i) - m) * (readout.x(i) - m);
        }
        cov.diagonal().array() += var_x;
        weights = gls_weights(cov);
        rep.fisher = slope * slope * cov.llt().solve(Eigen::VectorXd::Ones(plan.nu)).sum();
    } else {
        rep.fisher = static_cast<double>(plan.nu) * f_sample;
        weights = Eigen::VectorXd::Constant(plan.nu, 1.0 / static_cast<double>(plan.nu));
    }
    rep.crb = 1.0 / rep.fisher;

    // Log masses on the g grid, built once.
    Eigen::VectorXd g_grid;
    Eigen::MatrixXd log_mass;
    if (plan.estimator == Estimator::MLE_Grid) {
        const double half = 8.0 * std::sqrt(rep.crb);
        g_grid = Eigen::VectorXd::LinSpaced(plan.grid_points, g - half, g + half);
        log_mass.resize(readout.size(), plan.grid_points);
        for (int j = 0; j < plan.grid_points; ++j) {
            SampledDistribution d = standard_readout(spec, g_grid(j));
            for (Eigen::Index i = 0; i < d.size(); ++i) {
                log_mass(i, j) = std::log(std::max(d.values(i) * d.dx, 1e-300));
            }
        }
    }

    rep.estimates.resize(static_cast<std::size_t>(plan.trials));
    if (plan.keep_samples) {
        rep.samples.resize(static_cast<std::size_t>(plan.trials));
    }
    for (int t = 0; t < plan.trials; ++t) {
        std::mt19937_64 rng = trial_stream(plan.seed, static_cast<std::uint64_t>(t));
        std::vector<double> xs = sample(readout, nu, rng);
        Eigen::Map<Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(nu));
        if (noise) {
            x += sample_noise(*noise, rng);
        }
        double est = 0.0;
        switch (plan.estimator) {
        case Estimator::AMR:
            est = amr_estimate(x, slope) - offset / slope;
            break;
        case Estimator::MLE_Correlated:
            est = (mle_correlated_weighted(x, weights) - offset) / slope;
            break;
        case Estimator::MLE_Grid: {
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(readout.size());
            for (double v : xs) {
                auto k = static_cast<Eigen::Index>(std::lround((v - readout.x0) / readout.dx));
                counts(std::clamp<Eigen::Index>(k, 0, readout.size() - 1)) += 1.0;
            }
            Eigen::VectorXd ll = log_mass.transpose() * counts;
            est = mle_grid([&](double gg) {
                      auto j = static_cast<Eigen::Index>(std::lround((gg - g_grid(0)) / (g_grid(1) - g_grid(0))));
                      return ll(j);
                  },
                  g_grid)
                      .estimate;
            break;
        }
        }
        rep.estimates[static_cast<std::size_t>(t)] = est;
        if (plan.keep_samples) {
            rep.samples[static_cast<std::size_t>(t)] = std::move(xs);
        }
    }

    const VarianceEstimate v = jackknife_variance(rep.estimates);
    rep.mean_estimate = v.mean;
    rep.empirical_variance = v.variance;
    rep.standard_error = std::sqrt(v.variance / static_cast<double>(plan.trials));
    rep.crb_ratio = v.variance * rep.fisher;
    rep.crb_ratio_se = v.jackknife_se * rep.fisher;
    return rep;
}

void to_json(nlohmann::json &j, const EstimateReport &r) {
    j = nlohmann::json{{"true_value", r.true_value},
                       {"mean_estimate", r.mean_estimate},
                       {"standard_error", r.standard_error},
                       {"empirical_variance", r.empirical_variance},
                       {"fisher", r.fisher},
                       {"crb", r.crb},
                       {"crb_ratio", r.crb_ratio},
                       {"crb_ratio_se", r.crb_ratio_se},
                       {"calibration", r.calibration}};
}

}  // namespace wvalab
