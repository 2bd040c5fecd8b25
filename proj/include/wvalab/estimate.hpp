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

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "wvalab/meter.hpp"
#include "wvalab/noise.hpp"
#include "wvalab/schemes.hpp"

namespace wvalab {

/// Independent stream for one trial, keyed by (seed, trial).
std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial);

/// Inverse-CDF draws from a gridded density; uniform within the chosen cell.
std::vector<double> sample(const SampledDistribution &dist, std::size_t nu, std::mt19937_64 &rng);
std::vector<double> sample(const SampledDistribution &dist, std::size_t nu, std::uint64_t seed);

/// Vose alias table over unnormalized non-negative weights.
class AliasTable {
  public:
    explicit AliasTable(const Eigen::VectorXd &weights);
    Eigen::Index draw(std::mt19937_64 &rng) const;
    Eigen::Index size() const {
        return static_cast<Eigen::Index>(prob_.size());
    }

  private:
    std::vector<double> prob_;
    std::vector<Eigen::Index> alias_;
};

std::vector<Eigen::Index> sample_discrete(const Eigen::VectorXd &weights, std::size_t nu, std::uint64_t seed);

double amr_estimate(const std::vector<double> &samples, double calibration);
double amr_estimate(const Eigen::VectorXd &samples, double calibration);

/// f = C⁻¹1 / 1ᵀC⁻¹1, exactly uniform for exchangeable C.
Eigen::VectorXd gls_weights(const Eigen::MatrixXd &cov);
double mle_correlated(const Eigen::VectorXd &samples, const Eigen::MatrixXd &cov);
/// Same estimate with precomputed weights; uniform weights take the amr_estimate path.
double mle_correlated_weighted(const Eigen::VectorXd &samples, const Eigen::VectorXd &weights);

struct GridMle {
    double estimate;
    Eigen::Index index;  // discrete argmax
    double log_likelihood;
};

/// Argmax of loglik over g_grid, refined by the parabola through the peak and its neighbours.
GridMle mle_grid(const std::function<double(double)> &loglik, const Eigen::VectorXd &g_grid);
GridMle mle_grid(const std::vector<double> &samples, const std::function<double(double x, double g)> &log_density,
                 const Eigen::VectorXd &g_grid);

enum class Estimator { AMR, MLE_Correlated, MLE_Grid };

const char *to_string(Estimator e);
Estimator estimator_from_string(const std::string &name);

struct ExperimentPlan {
    StandardSpec scheme;
    /// Extra readout noise per trial; its length is forced to nu.
    std::optional<CorrelatedNoiseModel> noise;
    int nu = 10000;
    int trials = 200;
    std::uint64_t seed = 2024;
    Estimator estimator = Estimator::AMR;
    int grid_points = 81;  // g grid for MLE_Grid
    bool keep_samples = false;

    void validate() const;
};

struct EstimateReport {
    double true_value = 0.0;
    double mean_estimate = 0.0;
    double standard_error = 0.0;
    double empirical_variance = 0.0;
    double fisher = 0.0;  // per trial, ν·F for i.i.d. readout
    double crb = 0.0;
    double crb_ratio = 0.0;
    double crb_ratio_se = 0.0;
    double calibration = 0.0;
    std::vector<double> estimates;
    std::vector<std::vector<double>> samples;  // kept only on request
};

EstimateReport run_experiment(const ExperimentPlan &plan);

/// Unbiased variance and its leave-one-out jackknife standard error.
struct VarianceEstimate {
    double mean;
    double variance;
    double jackknife_se;
};

VarianceEstimate jackknife_variance(const std::vector<double> &x);

void to_json(nlohmann::json &j, const EstimateReport &r);

}  // namespace wvalab
