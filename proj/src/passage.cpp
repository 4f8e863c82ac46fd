#include "pocketlab/passage.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "pocketlab/errors.hpp"

namespace pocketlab {

namespace {

constexpr double kGx[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
constexpr double kGw[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                           0.2369268850561891};

double gauss(const std::function<double(double)>& f, double a, double b) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a), sum = 0.0;
  for (int q = 0; q < 5; ++q) sum += kGw[q] * f(mid + half * kGx[q]);
  return half * sum;
}

// Survival v(t) = sum_k beta_k exp(-lambda_k t) of one killed problem at the
// start node.
struct Expansion {
  std::vector<double> lambda, beta;
  double at(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) s += beta[k] * std::exp(-lambda[k] * t);
    return s;
  }
  double integral() const {
    double s = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) s += beta[k] / lambda[k];
    return s;
  }
};

// Free nodes first..last of the tridiagonal system M dv/dt = -K v with
// K_ii = (g_{i-1} + g_i) / 2, K_{i,i+1} = -g_i / 2 and v = 0 beyond the free
// range. Returns the expansion of v at node `start` for the initial data v0.
Expansion expand(const std::vector<double>& g, const std::vector<double>& mass, int first, int last, int start,
                 const std::vector<double>& v0) {
  const int n = last - first + 1;
  Eigen::VectorXd diag(n), sub(std::max(n - 1, 0));
  for (int i = first; i <= last; ++i) {
    auto iu = static_cast<std::size_t>(i);
    double left = i > 0 ? g[iu - 1] : 0.0;
    diag(i - first) = 0.5 * (left + g[iu]) / mass[iu];
    if (i < last) sub(i - first) = -0.5 * g[iu] / std::sqrt(mass[iu] * mass[iu + 1]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("passage eigen-decomposition failed");
  Expansion e;
  e.lambda.resize(static_cast<std::size_t>(n));
  e.beta.resize(static_cast<std::size_t>(n));
  const Eigen::MatrixXd& y = es.eigenvectors();
  for (int k = 0; k < n; ++k) {
    double proj = 0.0;
    for (int i = first; i <= last; ++i)
      proj += y(i - first, k) * std::sqrt(mass[static_cast<std::size_t>(i)]) * v0[static_cast<std::size_t>(i)];
    e.lambda[static_cast<std::size_t>(k)] = es.eigenvalues()(k);
    e.beta[static_cast<std::size_t>(k)] = y(start - first, k) / std::sqrt(mass[static_cast<std::size_t>(start)]) * proj;
  }
  return e;
}

}  // namespace

double PassageLaw::Table::draw(double u) const {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.begin()) return std::exp(log_t.front());
  if (it == cdf.end()) return std::exp(log_t.back());
  auto j = static_cast<std::size_t>(it - cdf.begin());
  double f0 = cdf[j - 1], f1 = cdf[j];
  double s = f1 > f0 ? (u - f0) / (f1 - f0) : 0.0;
  return std::exp(log_t[j - 1] + s * (log_t[j] - log_t[j - 1]));
}

PassageLaw::PassageLaw(int dim, double R, double c, double h, int cells) : dim_(dim), R_(R), c_(c), h_(h) {
  if (dim != 1 && dim != 2) throw ConfigError("passage dimension must be 1 or 2");
  if (!(R > 0.0) || !(c > 0.0) || !(h > 0.0) || cells < 32) throw ConfigError("invalid passage parameters");
  auto sigma = [&](double r) {
    if (r >= R) return 1.0;
    double q = 1.0 - r * r / (R * R);
    return 1.0 + c * q * q;
  };
  auto weight = [&](double r) { return dim == 2 ? r : 1.0; };

  // Nodes uniform in w: a fine table inside the pocket, asinh outside.
  const double omega = R / std::sqrt(c), L = R + h;
  const int fine = 64 * cells;
  std::vector<double> wf(static_cast<std::size_t>(fine) + 1, 0.0);
  for (int i = 1; i <= fine; ++i)
    wf[static_cast<std::size_t>(i)] = wf[static_cast<std::size_t>(i) - 1] +
                                      gauss([&](double r) { return 1.0 / std::sqrt(sigma(r)); }, R * (i - 1) / fine,
                                            R * i / fine);
  const double w_R = wf.back(), w_out = omega * std::asinh(h / omega);
  int n_in = std::max(16, static_cast<int>(std::lround(cells * w_R / (w_R + w_out))));
  int n_out = std::max(16, cells - n_in);
  std::vector<double> r;
  for (int i = 0; i <= n_in; ++i) {
    double target = w_R * i / n_in;
    auto it = std::lower_bound(wf.begin(), wf.end(), target);
    auto j = static_cast<std::size_t>(std::clamp<long>(it - wf.begin(), 1, fine));
    double s = (target - wf[j - 1]) / (wf[j] - wf[j - 1]);
    r.push_back(R * (static_cast<double>(j) - 1.0 + s) / fine);
  }
  r.front() = 0.0;
  r.back() = R;
  for (int j = 1; j <= n_out; ++j) r.push_back(R + omega * std::sinh(w_out * j / n_out / omega));
  r.back() = L;
  const int N = static_cast<int>(r.size()) - 1;
  const int start = n_in;

  // Face conductances, control-volume masses and the angular potential.
  std::vector<double> g(static_cast<std::size_t>(N)), res(static_cast<std::size_t>(N));
  std::vector<double> mass(static_cast<std::size_t>(N) + 1), pot(static_cast<std::size_t>(N) + 1, 0.0);
  for (int i = 0; i < N; ++i) {
    auto iu = static_cast<std::size_t>(i);
    res[iu] = gauss([&](double x) { return 1.0 / sigma(x); }, r[iu], r[iu + 1]);
    g[iu] = weight(0.5 * (r[iu] + r[iu + 1])) / res[iu];
  }
  for (int i = 0; i <= N; ++i) {
    auto iu = static_cast<std::size_t>(i);
    double a = i > 0 ? 0.5 * (r[iu - 1] + r[iu]) : 0.0;
    double b = i < N ? 0.5 * (r[iu] + r[iu + 1]) : r[iu];
    mass[iu] = dim == 2 ? 0.5 * (b * b - a * a) : b - a;
    if (dim == 2 && i > 0) {
      auto f = [&](double x) { return sigma(x) / x; };
      pot[iu] = gauss(f, a, r[iu]) + gauss(f, r[iu], b);
    }
  }

  auto make_table = [](const std::function<double(double)>& cdf, double t_lo, double t_hi) {
    constexpr int kPoints = 4096;
    Table tab;
    double a = std::log(t_lo), b = std::log(t_hi);
    for (int j = 0; j < kPoints; ++j) {
      double lt = a + (b - a) * j / (kPoints - 1);
      double f = std::clamp(cdf(std::exp(lt)), 0.0, 1.0);
      if (!tab.cdf.empty()) f = std::max(f, tab.cdf.back());
      tab.log_t.push_back(lt);
      tab.cdf.push_back(f);
    }
    double top = tab.cdf.back();
    if (!(top > 0.0)) throw std::runtime_error("empty passage law");
    for (double& f : tab.cdf) f /= top;
    return tab;
  };
  auto horizon = [&](const std::function<double(double)>& tail, double scale) {
    double t = scale;
    while (std::abs(tail(t)) > 1e-15 && t < 1e6 * scale) t *= 1.5;
    return t;
  };
  const double t_lo = 1e-3 * h * h;

  std::vector<double> ones(static_cast<std::size_t>(N) + 1, 1.0);
  Expansion all = expand(g, mass, 0, N - 1, start, ones);
  mean_time_ = all.integral();
  double t_hi = horizon([&](double t) { return all.at(t); }, mean_time_);

  if (dim == 1) {
    // The exit side: the antisymmetric problem with u(0) = 0, u(L) = 1.
    std::vector<double> steady(static_cast<std::size_t>(N) + 1, 0.0);
    for (int i = 1; i <= N; ++i)
      steady[static_cast<std::size_t>(i)] = steady[static_cast<std::size_t>(i) - 1] + res[static_cast<std::size_t>(i) - 1];
    for (double& s : steady) s /= steady.back();
    Expansion anti = expand(g, mass, 1, N - 1, start, steady);
    double uR = steady[static_cast<std::size_t>(start)];
    p_same_ = 0.5 * (1.0 + uR);
    t_hi = std::max(t_hi, horizon([&](double t) { return anti.at(t); }, mean_time_));
    same_ = make_table([&](double t) { return 0.5 * ((1.0 - all.at(t)) + (uR - anti.at(t))) / p_same_; }, t_lo, t_hi);
    other_ = make_table([&](double t) { return 0.5 * ((1.0 - all.at(t)) - (uR - anti.at(t))) / (1.0 - p_same_); },
                        t_lo, t_hi);
  }
  all_ = make_table([&](double t) { return 1.0 - all.at(t); }, t_lo, t_hi);

  if (dim == 2) {
    // phi_m = E exp(-m^2 V / 2): (K + m^2 Q / 2) phi = 0 with phi = 0 at the
    // centre and 1 at R + h.
    const int n = N - 1;
    std::vector<double> cp(static_cast<std::size_t>(n)), dp(static_cast<std::size_t>(n));
    for (int m = 1; m <= 200000; ++m) {
      double m2 = static_cast<double>(m) * m;
      for (int i = 1; i <= n; ++i) {
        auto iu = static_cast<std::size_t>(i);
        double diag = 0.5 * (g[iu - 1] + g[iu]) + 0.5 * m2 * pot[iu];
        double lower = i > 1 ? -0.5 * g[iu - 1] : 0.0;
        double upper = -0.5 * g[iu];
        double rhs = i == n ? 0.5 * g[iu] : 0.0;
        auto k = iu - 1;
        double denom = diag - (i > 1 ? lower * cp[k - 1] : 0.0);
        cp[k] = upper / denom;
        dp[k] = (rhs - (i > 1 ? lower * dp[k - 1] : 0.0)) / denom;
      }
      double phi = dp[static_cast<std::size_t>(n) - 1];
      for (int i = n - 1; i >= start; --i) phi = dp[static_cast<std::size_t>(i) - 1] - cp[static_cast<std::size_t>(i) - 1] * phi;
      if (phi < 1e-16) break;
      phi_.push_back(phi);
    }
    // P(|angle| <= theta) = theta / pi + (2 / pi) sum_m phi_m sin(m theta) / m.
    constexpr int kAngles = 4096;
    for (int j = 0; j <= kAngles; ++j) {
      double th = std::numbers::pi * j / kAngles;
      double s_prev = 0.0, s = std::sin(th), two_c = 2.0 * std::cos(th), sum = 0.0;
      for (std::size_t m = 0; m < phi_.size(); ++m) {
        sum += phi_[m] * s / static_cast<double>(m + 1);
        double next = two_c * s - s_prev;
        s_prev = s;
        s = next;
      }
      double f = std::clamp(th / std::numbers::pi + 2.0 / std::numbers::pi * sum, 0.0, 1.0);
      if (!theta_cdf_.empty()) f = std::max(f, theta_cdf_.back());
      theta_.push_back(th);
      theta_cdf_.push_back(f);
    }
    theta_cdf_.back() = 1.0;
  }
}

double PassageLaw::time_cdf(double t) const {
  if (!(t > 0.0)) return 0.0;
  double lt = std::log(t);
  if (lt <= all_.log_t.front()) return 0.0;
  if (lt >= all_.log_t.back()) return 1.0;
  auto it = std::upper_bound(all_.log_t.begin(), all_.log_t.end(), lt);
  auto j = static_cast<std::size_t>(it - all_.log_t.begin());
  double s = (lt - all_.log_t[j - 1]) / (all_.log_t[j] - all_.log_t[j - 1]);
  return all_.cdf[j - 1] + s * (all_.cdf[j] - all_.cdf[j - 1]);
}

PassageSample PassageLaw::sample(RandomStream& rng) const {
  PassageSample s;
  if (dim_ == 1) {
    s.side = rng.uniform() < p_same_ ? 1 : -1;
    s.time = (s.side > 0 ? same_ : other_).draw(rng.uniform());
    return s;
  }
  s.time = all_.draw(rng.uniform());
  double u = rng.uniform();
  auto it = std::upper_bound(theta_cdf_.begin(), theta_cdf_.end(), u);
  double a;
  if (it == theta_cdf_.end()) {
    a = std::numbers::pi;
  } else {
    auto j = static_cast<std::size_t>(std::max<long>(it - theta_cdf_.begin(), 1));
    double f0 = theta_cdf_[j - 1], f1 = theta_cdf_[j];
    a = theta_[j - 1] + (f1 > f0 ? (u - f0) / (f1 - f0) : 0.0) * (theta_[j] - theta_[j - 1]);
  }
  s.angle = rng.uniform() < 0.5 ? -a : a;
  return s;
}

}  // namespace pocketlab
