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

#include "wvalab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "csv.hpp"
#include "wvalab/error.hpp"
#include "wvalab/infometrics.hpp"

namespace wvalab {

namespace {

double phi_density(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Φ(b) − Φ(a), evaluated on the tail side that avoids cancellation.
double normal_mass(double a, double b) {
    if (a > 0.0) {
        return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
    }
    return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
}

double lag_sum(long n, double rho) {
    double s = 0.0;
    double rm = 1.0;
    for (long m = 1; m < n; ++m) {
        rm *= rho;
        if (rm == 0.0) {
            break;
        }
        s += static_cast<double>(n - m) * rm;
    }
    return s;
}

}  // namespace

void CorrelatedNoiseModel::validate() const {
    if (!(a > 0.0) || !(c >= 0.0) || !(dt > 0.0) || !(tau_c > 0.0) || n < 1) {
        fail(ErrorCode::InvalidArgument, "noise model needs a > 0, c >= 0, dt > 0, tau_c > 0, N >= 1");
    }
}

double CorrelatedNoiseModel::rho() const {
    return std::exp(-dt / tau_c);
}

Eigen::MatrixXd covariance(const CorrelatedNoiseModel &model) {
    model.validate();
    const double rho = model.rho();
    Eigen::VectorXd lag(model.n);
    lag(0) = 1.0;
    for (long m = 1; m < model.n; ++m) {
        lag(m) = lag(m - 1) * rho;
    }
    Eigen::MatrixXd C(model.n, model.n);
    for (long k = 0; k < model.n; ++k) {
        for (long l = 0; l < model.n; ++l) {
            C(k, l) = model.c * lag(std::abs(k - l));
        }
        C(k, k) += model.a;
    }
    return C;
}

double cm_fisher_correlated(const CorrelatedNoiseModel &model) {
    Eigen::MatrixXd C = covariance(model);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.n);
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) {
        C.diagonal().array() += 1e-12 * C.trace() / static_cast<double>(model.n);
        llt.compute(C);
        if (llt.info() != Eigen::Success) {
            fail(ErrorCode::SingularCovariance, "covariance is not positive definite");
        }
    }
    const Eigen::VectorXd y = llt.matrixL().solve(ones);
    return y.squaredNorm();
}

const char *to_string(NoiseRegime regime) {
    switch (regime) {
    case NoiseRegime::White:
        return "white";
    case NoiseRegime::SlowDecorrelated:
        return "slow_decorrelated";
    case NoiseRegime::SlowCorrelated:
        return "slow_correlated";
    }
    return "?";
}

NoiseRegime classify_noise_regime(const CorrelatedNoiseModel &model, double p_f) {
    model.validate();
    if (model.tau_c / model.dt <= 1.0) {
        return NoiseRegime::White;
    }
    return p_f < model.dt / model.tau_c ? NoiseRegime::SlowDecorrelated : NoiseRegime::SlowCorrelated;
}

AmrScheme AmrScheme::cm() {
    return {};
}

AmrScheme AmrScheme::wva(double p_f, double weak_value) {
    if (!(p_f > 0.0) || p_f > 1.0) {
        fail(ErrorCode::InvalidArgument, "p_f must lie in (0, 1]");
    }
    return {Kind::WVA, p_f, weak_value};
}

AmrScheme AmrScheme::wva_tradeoff(double p_f) {
    AmrScheme s = wva(p_f, 1.0);
    s.weak_value = 1.0 / std::sqrt(p_f);
    return s;
}

double amr_information(const CorrelatedNoiseModel &model, const AmrScheme &scheme) {
    model.validate();
    const double n = static_cast<double>(model.n);
    const double a = model.a;
    const double c = model.c;
    if (scheme.kind == AmrScheme::Kind::CM) {
        if (classify_noise_regime(model, 1.0) == NoiseRegime::White) {
            return n / (a + c);
        }
        return n / (a + n * c);
    }
    const double pf = scheme.p_f;
    const double w2 = scheme.weak_value * scheme.weak_value;
    switch (classify_noise_regime(model, pf)) {
    case NoiseRegime::White:
    case NoiseRegime::SlowDecorrelated:
        return w2 * pf * n / (a + c);
    case NoiseRegime::SlowCorrelated:
        return w2 * pf * n / (a + pf * n * c);
    }
    return 0.0;
}

double amr_information_numeric(const CorrelatedNoiseModel &model, const AmrScheme &scheme) {
    model.validate();
    const double n = static_cast<double>(model.n);
    const double s = lag_sum(model.n, model.rho());
    if (scheme.kind == AmrScheme::Kind::CM) {
        const double v = (n * (model.a + model.c) + 2.0 * model.c * s) / (n * n);
        return 1.0 / v;
    }
    const double pf = scheme.p_f;
    const double kept = pf * n;
    const double v = (kept * (model.a + model.c) + 2.0 * model.c * pf * pf * s) / (kept * kept);
    return scheme.weak_value * scheme.weak_value / v;
}

Eigen::VectorXd sample_noise(const CorrelatedNoiseModel &model, std::mt19937_64 &rng) {
    model.validate();
    std::normal_distribution<double> z(0.0, 1.0);
    const double rho = model.rho();
    const double sa = std::sqrt(model.a);
    const double sc = std::sqrt(model.c);
    const double innov = std::sqrt(1.0 - rho * rho);
    Eigen::VectorXd x(model.n);
    double y = sc * z(rng);
    for (long k = 0; k < model.n; ++k) {
        if (k > 0) {
            y = rho * y + sc * innov * z(rng);
        }
        x(k) = sa * z(rng) + y;
    }
    return x;
}

void write_csv(std::ostream &os, const Eigen::MatrixXd &matrix) {
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j > 0) {
                os << ',';
            }
            os << detail::format_double(matrix(i, j));
        }
        os << '\n';
    }
}

void BeamGeometry::validate() const {
    if (!(k0 > 0.0) || !(l1 > 0.0) || !(l2 > 0.0) || !(f > 0.0) || !(sigma > 0.0) || !(photons > 0.0)) {
        fail(ErrorCode::InvalidArgument, "beam geometry fields must be positive");
    }
}

double BeamGeometry::diffraction_factor() const {
    return (l1 + l2) / (2.0 * k0 * sigma * sigma);
}

double jitter_fisher(JitterCase which, const BeamGeometry &geo, double noise_std, JitterScheme scheme) {
    geo.validate();
    if (!(noise_std >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "noise_std must be non-negative");
    }
    const double s2 = geo.sigma * geo.sigma;
    const double base = 4.0 * geo.photons * s2;
    const bool wva = scheme == JitterScheme::ImaginaryWVA;
    switch (which) {
    case JitterCase::AngularB0: {
        const double blur = 1.0 + std::pow(2.0 * geo.sigma * noise_std, 2);
        if (!wva) {
            return base / blur;
        }
        const double d = geo.diffraction_factor();
        return base / (1.0 + d * d * blur);
    }
    case JitterCase::DisplacementQ0:
        if (!wva) {
            fail(ErrorCode::UnsupportedCombination, "no closed form for CM with meter displacement jitter");
        }
        return 4.0 * geo.photons * (s2 + noise_std * noise_std);
    case JitterCase::DetectorD0:
        if (!wva) {
            return base / (1.0 + std::pow(2.0 * geo.k0 * geo.sigma * noise_std / geo.f, 2));
        }
        return base / (1.0 + noise_std * noise_std / s2);
    }
    return 0.0;
}

PixelatedDetector::PixelatedDetector(double r_, double h_) : r(r_), h(h_) {
    if (!(r > 0.0) || !(h >= 0.0) || !(h < r)) {
        fail(ErrorCode::InvalidArgument, "pixel detector needs r > 0 and 0 <= h < r");
    }
}

long PixelatedDetector::pixel_of(double x) const {
    return static_cast<long>(std::floor((x - h) / r + 0.5));
}

double PixelatedDetector::left_edge(long n) const {
    return (static_cast<double>(n) - 0.5) * r + h;
}

PixelDistribution pixelate(const SampledDistribution &dist, const PixelatedDetector &det) {
    if (dist.size() == 0) {
        fail(ErrorCode::InvalidArgument, "empty distribution");
    }
    if (dist.dx > det.r / 8.0) {
        fail(ErrorCode::ResolutionTooCoarse, "fewer than 8 samples per pixel");
    }
    const Eigen::Index n = dist.size();
    const double lo = dist.x(0) - 0.5 * dist.dx;
    const double hi = dist.x(n - 1) + 0.5 * dist.dx;
    PixelDistribution out;
    out.first = det.pixel_of(lo);
    long last = det.pixel_of(hi);
    if (det.left_edge(last) >= hi && last > out.first) {
        --last;
    }
    out.masses = Eigen::VectorXd::Zero(last - out.first + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mass = dist.values(i) * dist.dx;
        const double a = dist.x(i) - 0.5 * dist.dx;
        const double b = a + dist.dx;
        const long pa = det.pixel_of(a);
        const long pb = det.pixel_of(b);
        if (pa == pb) {
            out.masses(pa - out.first) += mass;
            continue;
        }
        double cursor = a;
        for (long p = pa; p <= pb; ++p) {
            const double edge = std::min(b, det.left_edge(p + 1));
            if (edge > cursor) {
                out.masses(p - out.first) += mass * (edge - cursor) / dist.dx;
                cursor = edge;
            }
        }
    }
    return out;
}

double interpolate_density(const SampledDistribution &dist, double x) {
    const double t = (x - dist.x0) / dist.dx;
    const Eigen::Index n = dist.size();
    if (t < 0.0 || t > static_cast<double>(n - 1)) {
        return 0.0;
    }
    const Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(t), n - 2);
    const double u = t - static_cast<double>(i);
    return (1.0 - u) * dist.values(i) + u * dist.values(i + 1);
}

namespace {

/// ∫ of the linear interpolant from x0 to x.
class LinearCumulative {
  public:
    explicit LinearCumulative(const SampledDistribution &dist) : d_(dist), c_(dist.size()) {
        c_(0) = 0.0;
        for (Eigen::Index i = 1; i < dist.size(); ++i) {
            c_(i) = c_(i - 1) + 0.5 * dist.dx * (dist.values(i - 1) + dist.values(i));
        }
    }
    double operator()(double x) const {
        const Eigen::Index n = d_.size();
        const double t = (x - d_.x0) / d_.dx;
        if (t <= 0.0) {
            return 0.0;
        }
        if (t >= static_cast<double>(n - 1)) {
            return c_(n - 1);
        }
        const Eigen::Index i = static_cast<Eigen::Index>(t);
        const double u = t - static_cast<double>(i);
        const double p0 = d_.values(i);
        const double p1 = d_.values(i + 1);
        return c_(i) + d_.dx * u * (p0 + 0.5 * u * (p1 - p0));
    }

  private:
    const SampledDistribution &d_;
    Eigen::VectorXd c_;
};

}  // namespace

double location_fisher(const SampledDistribution &dist) {
    double fi = 0.0;
    for (Eigen::Index i = 0; i + 1 < dist.size(); ++i) {
        const double p0 = dist.values(i);
        const double p1 = dist.values(i + 1);
        if (!(p0 > 0.0) || !(p1 > 0.0)) {
            continue;
        }
        const double slope = (p1 - p0) / dist.dx;
        const double diff = p1 - p0;
        const double inv_mean =
            std::abs(diff) < 1e-8 * p0 ? 2.0 / (p0 + p1) : (std::log(p1) - std::log(p0)) / diff;
        fi += slope * slope * dist.dx * inv_mean;
    }
    return fi;
}

double pixelated_location_fisher(const SampledDistribution &dist, const PixelatedDetector &det) {
    if (dist.size() < 2) {
        fail(ErrorCode::InvalidArgument, "distribution needs at least two samples");
    }
    if (dist.dx > det.r / 8.0) {
        fail(ErrorCode::ResolutionTooCoarse, "fewer than 8 samples per pixel");
    }
    LinearCumulative cum(dist);
    const long first = det.pixel_of(dist.x0);
    const long last = det.pixel_of(dist.x(dist.size() - 1));
    double fi = 0.0;
    for (long p = first; p <= last; ++p) {
        const double a = det.left_edge(p);
        const double b = det.left_edge(p + 1);
        const double m = cum(b) - cum(a);
        const double d = interpolate_density(dist, a) - interpolate_density(dist, b);
        if (m > 0.0) {
            fi += d * d / m;
        }
    }
    return fi;
}

double pixel_information_ratio(const SampledDistribution &dist, const PixelatedDetector &det) {
    const double ideal = location_fisher(dist);
    if (!(ideal > 0.0)) {
        fail(ErrorCode::ZeroVariance, "distribution carries no location information");
    }
    return pixelated_location_fisher(dist, det) / ideal;
}

namespace {

int next_pow2(double x) {
    int n = 1;
    while (n < x) {
        n *= 2;
    }
    return n;
}

SampledDistribution momentum_distribution(const MomentumGrid &mg) {
    SampledDistribution d;
    d.x0 = mg.p0;
    d.dx = mg.dp;
    d.values = mg.amplitudes.cwiseAbs2();
    return d;
}

ParamDistribution pixel_family(std::function<SampledDistribution(double)> readout, const PixelatedDetector &det) {
    ParamDistribution fam;
    fam.masses = [readout = std::move(readout), det](double g) {
        PixelDistribution pd = pixelate(readout(g), det);
        return Eigen::VectorXd(pd.masses / pd.masses.sum());
    };
    return fam;
}

}  // namespace

PixelRatioReport pixelated_fisher_ratio(PixelScheme scheme, double g, double sigma, const PixelatedDetector &det,
                                        const SystemState &pre, const SystemState &post, const Observable &A) {
    if (!(sigma > 0.0)) {
        fail(ErrorCode::InvalidArgument, "sigma must be positive");
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<CMatrix>(A.matrix()).eigenvalues();
    const double lmax = ev.cwiseAbs().maxCoeff();
    const double span = 8.0 * sigma + 4.0 * std::abs(g) * lmax + 2.0 * det.r;
    const int points = std::max(4096, next_pow2(16.0 * span / std::min(det.r, sigma)));
    EvolveOptions opts;
    opts.grid_points = points;
    opts.span = span;

    auto conditioned = [&](double gg) {
        CouplingConfig cfg{gg, Generator::MomentumKick, A};
        PostSelectedMeter ps = postselect(evolve_joint(pre, GaussianMeter(sigma), cfg, opts), post);
        if (ps.empty) {
            fail(ErrorCode::EmptyPostselection, "post-selection never succeeds");
        }
        return std::pair{std::get<GridMeter>(*ps.success_meter), ps.p_f};
    };

    PixelRatioReport rep{};
    rep.p_f = conditioned(g).second;
    int pad = 1;
    if (scheme == PixelScheme::ImaginaryWVA) {
        pad = next_pow2(16.0 * std::numbers::pi / (2.0 * span * det.r));
    }
    auto readout = [&, pad](double gg) {
        GridMeter m = conditioned(gg).first;
        if (scheme == PixelScheme::RealWVA) {
            return m.position_distribution();
        }
        return momentum_distribution(to_momentum(m, pad));
    };
    rep.f_wva = classical_fisher(pixel_family(readout, det), g).fi;

    auto cm_readout = [&](double gg) {
        return to_grid(GaussianMeter(sigma, gg * lmax), span, points).position_distribution();
    };
    rep.f_cm = classical_fisher(pixel_family(cm_readout, det), g).fi;
    rep.ratio = rep.p_f * rep.f_wva / rep.f_cm;

    SampledDistribution gq = to_grid(GaussianMeter(sigma), span, points).position_distribution();
    rep.alpha_q = pixel_information_ratio(gq, det);
    const double sp = 0.5 / sigma;
    const double pspan = 8.0 * sp + 2.0 * det.r;
    const int pp = std::max(4096, next_pow2(16.0 * pspan / std::min(det.r, sp)));
    SampledDistribution gp = to_grid(GaussianMeter(sp), pspan, pp).position_distribution();
    rep.alpha_p = pixel_information_ratio(gp, det);
    return rep;
}

void SaturatingDetector::validate() const {
    if (k_s < 1 || !(eta > 0.0) || eta > 1.0 || !(readout_sigma >= 0.0) || !(quantization > 0.0)) {
        fail(ErrorCode::InvalidArgument,
             "saturating detector needs k_s >= 1, 0 < eta <= 1, readout_sigma >= 0, quantization > 0");
    }
}

ResponseRow response_row(const SaturatingDetector &det, long n_in) {
    det.validate();
    if (n_in < 0) {
        fail(ErrorCode::InvalidArgument, "photon number must be non-negative");
    }
    const double q = det.quantization;
    auto level = [&](long m) { return std::clamp(std::lround(static_cast<double>(m) * q), 0L, det.k_s); };
    const double n = static_cast<double>(n_in);
    ResponseRow row;
    if (det.readout_sigma == 0.0) {
        row.first = level(std::lround(n / q));
        row.values = Eigen::VectorXd::Ones(1);
        return row;
    }
    const double s = det.readout_sigma;
    const long m_lo = static_cast<long>(std::floor((n - 10.0 * s) / q));
    const long m_hi = static_cast<long>(std::ceil((n + 10.0 * s) / q));
    const long k_lo = level(m_lo);
    const long k_hi = level(m_hi);
    row.first = k_lo;
    row.values = Eigen::VectorXd::Zero(k_hi - k_lo + 1);
    for (long m = m_lo; m <= m_hi; ++m) {
        const double lo = m == m_lo ? -std::numeric_limits<double>::infinity() : ((m - 0.5) * q - n) / s;
        const double hi = m == m_hi ? std::numeric_limits<double>::infinity() : ((m + 0.5) * q - n) / s;
        row.values(level(m) - k_lo) += normal_mass(lo, hi);
    }
    return row;
}

Eigen::VectorXd saturating_response(const SaturatingDetector &det, long n_in) {
    ResponseRow row = response_row(det, n_in);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(det.k_s + 1);
    out.segment(row.first, row.values.size()) = row.values;
    return out;
}

ResponseMatrix::ResponseMatrix(Eigen::MatrixXd matrix) : m_(std::move(matrix)) {
    if (m_.rows() == 0 || m_.cols() == 0) {
        fail(ErrorCode::InvalidArgument, "response matrix is empty");
    }
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
        if ((m_.row(i).array() < 0.0).any() || std::abs(m_.row(i).sum() - 1.0) > 1e-6) {
            fail(ErrorCode::InvalidArgument, "response row " + std::to_string(i) + " is not a distribution");
        }
    }
}

ResponseMatrix ResponseMatrix::from_model(const SaturatingDetector &det, long n_max) {
    Eigen::MatrixXd m(n_max + 1, det.k_s + 1);
    for (long n = 0; n <= n_max; ++n) {
        m.row(n) = saturating_response(det, n).transpose();
    }
    return ResponseMatrix(std::move(m));
}

ResponseMatrix ResponseMatrix::read_csv(std::istream &is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line == "\r") {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(detail::parse_double(cell));
            } catch (const Error &e) {
                fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": ragged response matrix");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        fail(ErrorCode::ConfigError, "response matrix file has no rows");
    }
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(i, j) = rows[i][j];
        }
    }
    return ResponseMatrix(std::move(m));
}

void ResponseMatrix::write_csv(std::ostream &os) const {
    wvalab::write_csv(os, m_);
}

ResponseRow ResponseMatrix::row(long n_in) const {
    if (n_in < 0 || n_in > max_input()) {
        fail(ErrorCode::InvalidArgument,
             "photon number " + std::to_string(n_in) + " outside the loaded response matrix");
    }
    Eigen::Index first = 0;
    Eigen::Index last = m_.cols() - 1;
    while (first < last && m_(n_in, first) == 0.0) {
        ++first;
    }
    while (last > first && m_(n_in, last) == 0.0) {
        --last;
    }
    return {static_cast<long>(first), m_.row(n_in).segment(first, last - first + 1).transpose()};
}

PixelProfile gaussian_pixel_profile(double photons, double sigma, double slope, const PixelatedDetector &det,
                                    long first, long last) {
    if (!(photons > 0.0) || !(sigma > 0.0) || last < first) {
        fail(ErrorCode::InvalidArgument, "beam profile needs photons > 0, sigma > 0 and a pixel range");
    }
    PixelProfile prof;
    prof.nbar = [=](double g) {
        Eigen::VectorXd nb(last - first + 1);
        for (long p = first; p <= last; ++p) {
            const double a = (det.left_edge(p) - slope * g) / sigma;
            const double b = (det.left_edge(p + 1) - slope * g) / sigma;
            nb(p - first) = photons * normal_mass(a, b);
        }
        return nb;
    };
    prof.dnbar = [=](double g) {
        Eigen::VectorXd d(last - first + 1);
        for (long p = first; p <= last; ++p) {
            const double a = (det.left_edge(p) - slope * g) / sigma;
            const double b = (det.left_edge(p + 1) - slope * g) / sigma;
            d(p - first) = photons * slope / sigma * (phi_density(a) - phi_density(b));
        }
        return d;
    };
    return prof;
}

SaturatedFisherReport saturated_fisher(const PixelProfile &profile, double g, const SaturatingDetector &det) {
    det.validate();
    return saturated_fisher(profile, g, det.eta, [&det](long n) { return response_row(det, n); });
}

SaturatedFisherReport saturated_fisher(const PixelProfile &profile, double g, double eta, const ResponseFn &response) {
    if (!(eta > 0.0) || eta > 1.0) {
        fail(ErrorCode::InvalidArgument, "eta must lie in (0, 1]");
    }
    const Eigen::VectorXd nb = profile.nbar(g);
    Eigen::VectorXd dn;
    if (profile.dnbar) {
        dn = profile.dnbar(g);
    } else {
        const double h = default_step(g);
        dn = (profile.nbar(g + h) - profile.nbar(g - h)) / (2.0 * h);
    }
    SaturatedFisherReport rep{0.0, 0.0, {}, {}};
    std::vector<double> p;
    std::vector<double> dp;
    for (Eigen::Index j = 0; j < nb.size(); ++j) {
        if (!(nb(j) > 0.0)) {
            fail(ErrorCode::InvalidArgument, "pixel " + std::to_string(j) + " has no mean photon number");
        }
        const double lam = eta * nb(j);
        const double dlam = eta * dn(j);
        const double width = 10.0 * std::sqrt(std::max(lam, 1.0));
        const long n_lo = std::max(0L, static_cast<long>(std::floor(lam - width)));
        const long n_hi = static_cast<long>(std::ceil(lam + width));
        p.clear();
        dp.clear();
        const double log_lam = std::log(lam);
        for (long n = n_lo; n <= n_hi; ++n) {
            const double nn = static_cast<double>(n);
            const double pois = std::exp(nn * log_lam - lam - std::lgamma(nn + 1.0));
            if (pois == 0.0) {
                continue;
            }
            const double dpois = pois * (nn / lam - 1.0) * dlam;
            const ResponseRow row = response(n);
            const std::size_t need = static_cast<std::size_t>(row.first + row.values.size());
            if (p.size() < need) {
                p.resize(need, 0.0);
                dp.resize(need, 0.0);
            }
            for (Eigen::Index k = 0; k < row.values.size(); ++k) {
                p[row.first + k] += row.values(k) * pois;
                dp[row.first + k] += row.values(k) * dpois;
            }
        }
        double fi = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k] > 1e-300) {
                fi += dp[k] * dp[k] / p[k];
            }
        }
        const double ideal = eta * dn(j) * dn(j) / nb(j);
        rep.pixel_fi.push_back(fi);
        rep.gamma.push_back(ideal > 0.0 ? fi / ideal : std::numeric_limits<double>::quiet_NaN());
        rep.fi += fi;
        rep.ideal_fi += ideal;
    }
    return rep;
}

}  // namespace wvalab
