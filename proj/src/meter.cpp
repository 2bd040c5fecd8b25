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

#include "wvalab/meter.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "csv.hpp"
#include "fft.hpp"
#include "wvalab/error.hpp"

namespace wvalab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGridNormTol = 1e-10;

int next_pow2(double x) {
    int p = 1;
    while (p < x && p < (1 << 20)) {
        p <<= 1;
    }
    return p;
}

// Position amplitudes from momentum amplitudes on the matching unpadded grid.
CVector from_momentum(const MomentumGrid &mom, double q0, double dq) {
    const auto n = static_cast<std::size_t>(mom.amplitudes.size());
    std::vector<cplx> buf(n);
    for (std::size_t k = 0; k < n; ++k) {
        double p = mom.p(static_cast<Eigen::Index>(k));
        buf[k] = mom.amplitudes(static_cast<Eigen::Index>(k)) * std::polar(1.0, p * q0);
    }
    detail::dft(buf, +1);
    CVector out(static_cast<Eigen::Index>(n));
    const double scale = mom.dp / std::sqrt(2.0 * kPi);
    for (std::size_t j = 0; j < n; ++j) {
        out(static_cast<Eigen::Index>(j)) =
            scale * buf[j] * std::polar(1.0, mom.p0 * static_cast<double>(j) * dq);
    }
    return out;
}

}  // namespace

GaussianMeter::GaussianMeter(double sigma_, double mean_q_, double mean_p_)
    : sigma(sigma_), mean_q(mean_q_), mean_p(mean_p_) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        fail(ErrorCode::InvalidArgument, "meter width must be positive and finite");
    }
}

double gaussian_density(const GaussianMeter &meter, double q) {
    double z = (q - meter.mean_q) / meter.sigma;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * kPi) * meter.sigma);
}

cplx gaussian_amplitude(const GaussianMeter &meter, double q) {
    double z = q - meter.mean_q;
    double mag = std::pow(2.0 * kPi * meter.sigma * meter.sigma, -0.25) *
                 std::exp(-z * z / (4.0 * meter.sigma * meter.sigma));
    return std::polar(mag, meter.mean_p * q);
}

double SampledDistribution::mass() const {
    return values.sum() * dx;
}

double SampledDistribution::mean() const {
    double m = 0.0;
    double w = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        m += x(i) * values(i);
        w += values(i);
    }
    return m / w;
}

double SampledDistribution::variance() const {
    double mu = mean();
    double v = 0.0;
    double w = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        double d = x(i) - mu;
        v += d * d * values(i);
        w += values(i);
    }
    return v / w;
}

GridMeter::GridMeter(double q0, double dq, CVector amplitudes) : q0_(q0), dq_(dq), amps_(std::move(amplitudes)) {
    if (!(dq_ > 0.0) || amps_.size() < 2) {
        fail(ErrorCode::InvalidArgument, "grid needs positive spacing and at least two samples");
    }
    double norm = amps_.squaredNorm() * dq_;
    if (std::abs(norm - 1.0) > kGridNormTol) {
        fail(ErrorCode::InvalidState, "grid wavefunction is not normalized (norm " + std::to_string(norm) + ")");
    }
}

GridMeter GridMeter::normalized(double q0, double dq, CVector amplitudes) {
    double norm = amplitudes.squaredNorm() * dq;
    if (!(norm > 0.0)) {
        fail(ErrorCode::NullVector, "cannot normalize a vanishing grid wavefunction");
    }
    amplitudes /= std::sqrt(norm);
    return GridMeter(q0, dq, std::move(amplitudes));
}

SampledDistribution GridMeter::position_distribution() const {
    return SampledDistribution{q0_, dq_, amps_.cwiseAbs2()};
}

double GridMeter::mean_q() const {
    return position_distribution().mean();
}

double GridMeter::variance_q() const {
    return position_distribution().variance();
}

double GridMeter::mean_p() const {
    MomentumGrid mom = to_momentum(*this);
    SampledDistribution d{mom.p0, mom.dp, mom.amplitudes.cwiseAbs2()};
    return d.mean();
}

double GridMeter::variance_p() const {
    MomentumGrid mom = to_momentum(*this);
    SampledDistribution d{mom.p0, mom.dp, mom.amplitudes.cwiseAbs2()};
    return d.variance();
}

MomentumGrid to_momentum(const GridMeter &meter, int pad) {
    if (pad < 1) {
        fail(ErrorCode::InvalidArgument, "padding factor must be >= 1");
    }
    const auto n = static_cast<std::size_t>(meter.size());
    const std::size_t np = n * static_cast<std::size_t>(pad);
    const double dq = meter.dq();
    const double dp = 2.0 * kPi / (static_cast<double>(np) * dq);
    const double p_min = -static_cast<double>(np / 2) * dp;

    std::vector<cplx> buf(np, cplx(0.0));
    for (std::size_t j = 0; j < n; ++j) {
        buf[j] = meter.amplitudes()(static_cast<Eigen::Index>(j)) *
                 std::polar(1.0, -p_min * static_cast<double>(j) * dq);
    }
    detail::dft(buf, -1);

    MomentumGrid out{p_min, dp, CVector(static_cast<Eigen::Index>(np))};
    const double scale = dq / std::sqrt(2.0 * kPi);
    for (std::size_t k = 0; k < np; ++k) {
        double p = out.p(static_cast<Eigen::Index>(k));
        out.amplitudes(static_cast<Eigen::Index>(k)) = scale * buf[k] * std::polar(1.0, -p * meter.q0());
    }
    return out;
}

CVector apply_momentum_function(const GridMeter &meter, const std::function<cplx(double)> &f) {
    MomentumGrid mom = to_momentum(meter);
    for (Eigen::Index k = 0; k < mom.amplitudes.size(); ++k) {
        mom.amplitudes(k) *= f(mom.p(k));
    }
    return from_momentum(mom, meter.q0(), meter.dq());
}

CVector apply_momentum_function(double q0, double dq, const CVector &amplitudes,
                                const std::function<cplx(double)> &f) {
    double norm = std::sqrt(amplitudes.squaredNorm() * dq);
    if (norm == 0.0) {
        return CVector::Zero(amplitudes.size());
    }
    GridMeter unit(q0, dq, amplitudes / norm);
    return norm * apply_momentum_function(unit, f);
}

CVector momentum_times(const GridMeter &meter) {
    return apply_momentum_function(meter, [](double p) { return cplx(p); });
}

GridMeter displace(const GridMeter &meter, double shift) {
    if (shift == 0.0) {
        return meter;
    }
    CVector out = apply_momentum_function(meter, [shift](double p) { return std::polar(1.0, -shift * p); });
    return GridMeter(meter.q0(), meter.dq(), std::move(out));
}

GridMeter to_grid(const GaussianMeter &meter, double span, int points) {
    if (points < 256) {
        fail(ErrorCode::InvalidArgument, "grid needs at least 256 points");
    }
    if (!(span >= 8.0 * meter.sigma)) {
        fail(ErrorCode::InsufficientSpan, "grid half-width must cover at least 8 sigma");
    }
    const double dq = 2.0 * span / points;
    const double q0 = meter.mean_q - span;
    CVector amps(points);
    for (int j = 0; j < points; ++j) {
        amps(j) = gaussian_amplitude(meter, q0 + j * dq);
    }
    return GridMeter::normalized(q0, dq, std::move(amps));
}

double WignerMap::integral() const {
    if (q.size() < 2 || p.size() < 2) {
        return 0.0;
    }
    return values.sum() * (q(1) - q(0)) * (p(1) - p(0));
}

Eigen::VectorXd WignerMap::position_marginal() const {
    return values.rowwise().sum() * (p(1) - p(0));
}

Eigen::VectorXd WignerMap::momentum_marginal() const {
    return values.colwise().sum().transpose() * (q(1) - q(0));
}

WignerMap wigner(const GridMeter &meter, const WignerOptions &options) {
    if (options.q_stride < 1) {
        fail(ErrorCode::InvalidArgument, "Wigner row stride must be >= 1");
    }
    const Eigen::Index n = meter.size();
    const double dq = meter.dq();
    const double dpw = kPi / (static_cast<double>(n) * dq);
    const CVector &psi = meter.amplitudes();

    std::vector<Eigen::Index> cols;
    std::vector<double> pvals;
    for (Eigen::Index kk = -n / 2; kk < n - n / 2; ++kk) {
        double p = static_cast<double>(kk) * dpw;
        if (std::abs(p) <= options.p_max) {
            cols.push_back((kk + n) % n);
            pvals.push_back(p);
        }
    }
    std::vector<Eigen::Index> rows;
    for (Eigen::Index j = 0; j < n; j += options.q_stride) {
        rows.push_back(j);
    }

    WignerMap map;
    map.q.resize(static_cast<Eigen::Index>(rows.size()));
    map.p = Eigen::Map<Eigen::VectorXd>(pvals.data(), static_cast<Eigen::Index>(pvals.size()));
    map.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));

    std::vector<cplx> buf(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::Index j = rows[r];
        std::fill(buf.begin(), buf.end(), cplx(0.0));
        const Eigen::Index reach = std::min(j, n - 1 - j);
        for (Eigen::Index m = -reach; m <= reach; ++m) {
            buf[static_cast<std::size_t>((m + n) % n)] = std::conj(psi(j + m)) * psi(j - m);
        }
        detail::dft(buf, +1);
        map.q(static_cast<Eigen::Index>(r)) = meter.q(j);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                dq / kPi * buf[static_cast<std::size_t>(cols[c])].real();
        }
    }
    return map;
}

SampledDistribution quadrature_marginal(const GridMeter &meter, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const Eigen::Index n = meter.size();
    const double dq = meter.dq();
    const double sd_q = std::sqrt(meter.variance_q());
    const double sd_p = std::sqrt(meter.variance_p());

    SampledDistribution out;
    if (std::abs(c) >= std::abs(s)) {
        // Free evolution exp(-i t P^2/2) maps Q to Q + tP.
        const double t = s / c;
        const double half = 0.5 * static_cast<double>(n) * dq;
        const double centre = meter.q0() + half;
        const double reach = std::abs(meter.mean_q() + t * meter.mean_p() - centre) + 10.0 * (sd_q + std::abs(t) * sd_p);
        const int pad = next_pow2(reach / half);
        const Eigen::Index np = n * pad;
        const Eigen::Index lead = (np - n) / 2;
        CVector amps = CVector::Zero(np);
        amps.segment(lead, n) = meter.amplitudes();
        GridMeter wide(meter.q0() - static_cast<double>(lead) * dq, dq, std::move(amps));
        CVector moved = apply_momentum_function(wide, [t](double p) { return std::polar(1.0, -0.5 * t * p * p); });
        Eigen::VectorXd dens = moved.cwiseAbs2() / std::abs(c);
        if (c > 0) {
            out = SampledDistribution{c * wide.q0(), c * dq, dens};
        } else {
            out = SampledDistribution{c * wide.q(np - 1), -c * dq, dens.reverse()};
        }
    } else {
        // Chirp exp(i a Q^2/2) maps P to P + aQ.
        const double a = c / s;
        CVector chirped(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            double q = meter.q(j);
            chirped(j) = meter.amplitudes()(j) * std::polar(1.0, 0.5 * a * q * q);
        }
        GridMeter tilted(meter.q0(), dq, std::move(chirped));
        const double sd_y = sd_p + std::abs(a) * sd_q;
        const double dp0 = 2.0 * kPi / (static_cast<double>(n) * dq);
        const int pad = next_pow2(20.0 * dp0 / sd_y);
        MomentumGrid mom = to_momentum(tilted, pad);
        const Eigen::Index np = mom.amplitudes.size();
        Eigen::VectorXd dens = mom.amplitudes.cwiseAbs2() / std::abs(s);
        if (s > 0) {
            out = SampledDistribution{s * mom.p0, s * mom.dp, dens};
        } else {
            out = SampledDistribution{s * mom.p(np - 1), -s * mom.dp, dens.reverse()};
        }
    }
    return out;
}

double optimal_quadrature_angle(cplx weak_value, double sigma) {
    if (weak_value == cplx(0.0)) {
        return 0.0;
    }
    return std::atan2(weak_value.imag() / (2.0 * sigma * sigma), weak_value.real());
}

double maximal_quadrature_shift(cplx weak_value, double g, double sigma) {
    double re = weak_value.real();
    double im = weak_value.imag() / (2.0 * sigma * sigma);
    return std::abs(g) * std::hypot(re, im);
}

int default_fock_cutoff(double mean_photons) {
    return static_cast<int>(std::ceil(mean_photons + 10.0 * std::sqrt(mean_photons) + 20.0));
}

FockMeter::FockMeter(int n_max, std::vector<FockComponent> components, double tail_mass)
    : n_max_(n_max), components_(std::move(components)), tail_mass_(tail_mass) {}

namespace {

std::pair<CVector, double> coherent_coefficients(cplx alpha, int n_max) {
    CVector c(n_max + 1);
    const double r = std::abs(alpha);
    const double phase = std::arg(alpha);
    if (r == 0.0) {
        c.setZero();
        c(0) = 1.0;
        return {c, 0.0};
    }
    const double log_r = std::log(r);
    const double nbar = r * r;
    for (int n = 0; n <= n_max; ++n) {
        double log_mag = -0.5 * nbar + n * log_r - 0.5 * std::lgamma(n + 1.0);
        c(n) = std::polar(std::exp(log_mag), n * phase);
    }
    double kept = c.squaredNorm();
    double tail = std::max(0.0, 1.0 - kept);
    c /= std::sqrt(kept);
    return {c, tail};
}

}  // namespace

FockMeter FockMeter::coherent(cplx alpha, std::optional<int> n_max) {
    return mixture({{1.0, alpha}}, n_max);
}

FockMeter FockMeter::mixture(const std::vector<std::pair<double, cplx>> &weighted_alphas, std::optional<int> n_max) {
    if (weighted_alphas.empty()) {
        fail(ErrorCode::InvalidArgument, "mixture needs at least one component");
    }
    double total = 0.0;
    int cutoff = 0;
    for (const auto &[w, alpha] : weighted_alphas) {
        if (!(w >= 0.0)) {
            fail(ErrorCode::InvalidState, "mixture weights must be nonnegative");
        }
        total += w;
        cutoff = std::max(cutoff, default_fock_cutoff(std::norm(alpha)));
    }
    if (std::abs(total - 1.0) > 1e-10) {
        fail(ErrorCode::InvalidState, "mixture weights must sum to 1");
    }
    if (n_max) {
        if (*n_max < 0) {
            fail(ErrorCode::InvalidArgument, "Fock cutoff must be nonnegative");
        }
        cutoff = *n_max;
    }
    std::vector<FockComponent> comps;
    double tail = 0.0;
    for (const auto &[w, alpha] : weighted_alphas) {
        auto [coeffs, t] = coherent_coefficients(alpha, cutoff);
        tail += w * t;
        comps.push_back(FockComponent{w, std::move(coeffs)});
    }
    return FockMeter(cutoff, std::move(comps), tail);
}

FockMeter FockMeter::pure(CVector coefficients) {
    if (coefficients.size() < 1 || std::abs(coefficients.squaredNorm() - 1.0) > 1e-10) {
        fail(ErrorCode::InvalidState, "Fock coefficients must be normalized");
    }
    const int n_max = static_cast<int>(coefficients.size()) - 1;
    return FockMeter(n_max, {FockComponent{1.0, std::move(coefficients)}}, 0.0);
}

FockMeter FockMeter::from_density(const CMatrix &rho) {
    DensityState checked(rho);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(checked.matrix());
    std::vector<FockComponent> comps;
    for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
        double lam = es.eigenvalues()(k);
        if (lam > 1e-14) {
            comps.push_back(FockComponent{lam, es.eigenvectors().col(k)});
        }
    }
    return FockMeter(static_cast<int>(rho.rows()) - 1, std::move(comps), 0.0);
}

FockMeter FockMeter::ensemble(std::vector<FockComponent> components, double tail_mass) {
    if (components.empty()) {
        fail(ErrorCode::InvalidArgument, "ensemble needs at least one component");
    }
    const Eigen::Index len = components.front().coefficients.size();
    double total = 0.0;
    for (const auto &c : components) {
        if (!(c.weight >= 0.0) || c.coefficients.size() != len || len < 1 ||
            std::abs(c.coefficients.squaredNorm() - 1.0) > 1e-10) {
            fail(ErrorCode::InvalidState, "ensemble components must be normalized, equal-length, nonnegative-weight");
        }
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-10) {
        fail(ErrorCode::InvalidState, "ensemble weights must sum to 1");
    }
    return FockMeter(static_cast<int>(len) - 1, std::move(components), tail_mass);
}

CMatrix FockMeter::density() const {
    CMatrix rho = CMatrix::Zero(n_max_ + 1, n_max_ + 1);
    for (const auto &c : components_) {
        rho += c.weight * c.coefficients * c.coefficients.adjoint();
    }
    return rho;
}

void FockMeter::check_truncation() const {
    if (tail_mass_ >= 1e-8) {
        fail(ErrorCode::TruncationTooTight,
             "Fock cutoff " + std::to_string(n_max_) + " discards probability " + std::to_string(tail_mass_));
    }
}

FockMoments fock_moments(const FockMeter &meter) {
    meter.check_truncation();
    double mean = 0.0;
    for (const auto &c : meter.components()) {
        for (Eigen::Index n = 0; n < c.coefficients.size(); ++n) {
            mean += c.weight * static_cast<double>(n) * std::norm(c.coefficients(n));
        }
    }
    double var = 0.0;
    for (const auto &c : meter.components()) {
        for (Eigen::Index n = 0; n < c.coefficients.size(); ++n) {
            double d = static_cast<double>(n) - mean;
            var += c.weight * d * d * std::norm(c.coefficients(n));
        }
    }
    return FockMoments{mean, var};
}

FockMeter quarter_variance_mixture(double mean_photons) {
    if (!(mean_photons >= 4.0)) {
        fail(ErrorCode::InvalidArgument, "quarter-variance mixture needs mean photon number >= 4");
    }
    const double spread = std::sqrt(0.25 * mean_photons * mean_photons - mean_photons);
    return FockMeter::mixture({{0.5, cplx(std::sqrt(mean_photons + spread))},
                               {0.5, cplx(std::sqrt(mean_photons - spread))}});
}

void write_csv(std::ostream &os, const GridMeter &meter) {
    os << "q,re,im\n";
    for (Eigen::Index i = 0; i < meter.size(); ++i) {
        os << detail::format_double(meter.q(i)) << ',' << detail::format_double(meter.amplitudes()(i).real()) << ','
           << detail::format_double(meter.amplitudes()(i).imag()) << '\n';
    }
}

void write_csv(std::ostream &os, const WignerMap &map) {
    os << "q,p,value\n";
    for (Eigen::Index i = 0; i < map.q.size(); ++i) {
        for (Eigen::Index j = 0; j < map.p.size(); ++j) {
            os << detail::format_double(map.q(i)) << ',' << detail::format_double(map.p(j)) << ','
               << detail::format_double(map.values(i, j)) << '\n';
        }
    }
}

void write_csv(std::ostream &os, const SampledDistribution &dist) {
    os << "x,density\n";
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        os << detail::format_double(dist.x(i)) << ',' << detail::format_double(dist.values(i)) << '\n';
    }
}

GridMeter read_grid_meter_csv(std::istream &is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("q,re,im", 0) != 0) {
        fail(ErrorCode::ConfigError, "grid CSV must start with header q,re,im");
    }
    std::vector<double> qs;
    std::vector<cplx> amps;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
            fail(ErrorCode::ConfigError, "malformed grid CSV row at line " + std::to_string(lineno));
        }
        qs.push_back(detail::parse_double(a));
        amps.emplace_back(detail::parse_double(b), detail::parse_double(c));
    }
    if (qs.size() < 2) {
        fail(ErrorCode::ConfigError, "grid CSV needs at least two rows");
    }
    const double dq = (qs.back() - qs.front()) / static_cast<double>(qs.size() - 1);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        if (std::abs(qs[i] - (qs.front() + static_cast<double>(i) * dq)) > 1e-9 * std::max(1.0, std::abs(dq) * qs.size())) {
            fail(ErrorCode::ConfigError, "grid CSV positions are not uniformly spaced");
        }
    }
    CVector v = Eigen::Map<CVector>(amps.data(), static_cast<Eigen::Index>(amps.size()));
    return GridMeter(qs.front(), dq, std::move(v));
}

}  // namespace wvalab
