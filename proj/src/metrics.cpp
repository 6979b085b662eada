#include "marlcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "marlcc/error.hpp"

namespace marlcc::metrics {

std::optional<int> convergence_speed(const std::vector<double>& rewards, int window,
                                     double threshold) {
    const int n = static_cast<int>(rewards.size());
    if (n < window || window < 1) return std::nullopt;
    // Trailing moving averages m(e) for e = window..n (1-based episodes).
    std::vector<double> ma;
    ma.reserve(n - window + 1);
    double acc = std::accumulate(rewards.begin(), rewards.begin() + window, 0.0);
    ma.push_back(acc / window);
    for (int e = window; e < n; ++e) {
        acc += rewards[e] - rewards[e - window];
        ma.push_back(acc / window);
    }
    const double peak = *std::max_element(ma.begin(), ma.end());
    for (std::size_t k = 0; k < ma.size(); ++k) {
        if (ma[k] >= threshold * peak) return window + static_cast<int>(k);
    }
    return std::nullopt;
}

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b) {
    Correlation c;
    const std::size_t n = a.size();
    if (n != b.size() || n < 3) return c;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return c;
    c.value = sab / std::sqrt(saa * sbb);
    c.value = std::clamp(c.value, -1.0, 1.0);
    c.defined = true;
    return c;
}

CreditEfficiency credit_assignment_efficiency(const std::vector<std::vector<double>>& phi_series,
                                              const std::vector<double>& global_rewards) {
    CreditEfficiency out;
    double sum = 0.0;
    int defined = 0;
    for (const auto& phi : phi_series) {
        const Correlation c = pearson(phi, global_rewards);
        out.per_agent.push_back(c);
        if (c.defined) {
            sum += c.value;
            ++defined;
        }
    }
    if (defined > 0) {
        out.mean.value = sum / defined;
        out.mean.defined = true;
    }
    return out;
}

StabilityEstimate stability_index(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& step,
    const Eigen::VectorXd& x0, double dt, int n_steps, double delta0, int renorm_interval,
    double state_box, int perturbed_dim) {
    StabilityEstimate est;
    Eigen::VectorXd nominal = x0;
    Eigen::VectorXd perturbed = x0;
    perturbed[perturbed_dim] += delta0;
    double log_sum = 0.0;
    int k = 0;
    for (k = 0; k < n_steps; ++k) {
        nominal = step(nominal);
        perturbed = step(perturbed);
        if (nominal.cwiseAbs().maxCoeff() > state_box ||
            perturbed.cwiseAbs().maxCoeff() > state_box) {
            est.partial = true;
            break;
        }
        if ((k + 1) % renorm_interval == 0) {
            const double d = (perturbed - nominal).norm();
            if (d > 0.0) {
                log_sum += std::log(d / delta0);
                perturbed = nominal + (delta0 / d) * (perturbed - nominal);
            }
            // zero separation contributes nothing and keeps the twin on top
        }
    }
    est.steps_used = k;
    const double time = k * dt;
    est.exponent = time > 0.0 ? log_sum / time : 0.0;
    return est;
}

double control_error_rms(const std::vector<Eigen::Vector2d>& actual,
                         const std::vector<Eigen::Vector2d>& reference) {
    if (actual.size() != reference.size()) {
        throw ShapeError("control_error_rms requires equally long trajectories");
    }
    if (actual.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        acc += (actual[i] - reference[i]).squaredNorm();
    }
    return std::sqrt(acc / actual.size());
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double sample_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double sample_var(const std::vector<double>& v, double mean) {
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / (v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    const double x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    TestResult r;
    if (a.size() < 2 || b.size() < 2) return r;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    const double va = sample_var(a, ma);
    const double vb = sample_var(b, mb);
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) {
        if (ma == mb) {
            r.statistic = 0.0;
            r.p_value = 1.0;
            r.defined = true;
        }
        return r;
    }
    r.statistic = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 /
                      (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    r.p_value = student_t_two_sided_p(r.statistic, df);
    r.defined = true;
    return r;
}

TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    TestResult r;
    if (a.size() != b.size()) return r;
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t n = diffs.size();
    if (n < 6) return r;  // below the normal-approximation floor

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        return std::abs(diffs[i]) < std::abs(diffs[j]);
    });
    std::vector<double> ranks(n);
    double tie_correction = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(diffs[idx[j + 1]]) == std::abs(diffs[idx[i]])) ++j;
        const double rank = 0.5 * (i + j) + 1.0;  // average rank, 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        const double t = static_cast<double>(j - i + 1);
        tie_correction += t * t * t - t;
        i = j + 1;
    }
    double w_plus = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (diffs[k] > 0.0) w_plus += ranks[k];
    }
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_correction / 48.0;
    if (var <= 0.0) return r;
    const double z = (w_plus - mean) / std::sqrt(var);
    r.statistic = std::min(w_plus, nn * (nn + 1.0) / 2.0 - w_plus);
    r.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
    r.defined = true;
    return r;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) return 0.0;
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    const double va = sample_var(a, ma);
    const double vb = sample_var(b, mb);
    const double pooled = std::sqrt(((a.size() - 1) * va + (b.size() - 1) * vb) /
                                    (a.size() + b.size() - 2.0));
    return pooled > 0.0 ? (ma - mb) / pooled : 0.0;
}

}  // namespace marlcc::metrics
