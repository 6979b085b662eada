#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace marlcc::metrics {

/// First episode whose trailing moving average reaches `threshold` times the
/// maximum moving average; nullopt when the series never gets there.
/// Episode indices are 1-based counts, so a constant series converges at
/// `window` (the first episode with a defined average).
std::optional<int> convergence_speed(const std::vector<double>& rewards, int window = 100,
                                     double threshold = 0.95);

struct Correlation {
    double value = 0.0;
    bool defined = false;  // false when either series has zero variance
};

/// Pearson correlation between each agent's credit series and the global
/// reward series, plus the mean over agents with defined correlations.
struct CreditEfficiency {
    std::vector<Correlation> per_agent;
    Correlation mean;
};

CreditEfficiency credit_assignment_efficiency(const std::vector<std::vector<double>>& phi_series,
                                              const std::vector<double>& global_rewards);

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Benettin-style largest-Lyapunov-exponent estimate of a closed-loop map.
struct StabilityEstimate {
    double exponent = 0.0;  // per second
    bool partial = false;   // stopped early because a trajectory left the box
    int steps_used = 0;
};

/// `step` advances a state by one tick of dt seconds. The perturbed twin is
/// renormalized to delta0 every `renorm_interval` steps and the mean log
/// expansion per unit time is returned.
StabilityEstimate stability_index(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& step,
                                  const Eigen::VectorXd& x0, double dt, int n_steps,
                                  double delta0 = 1e-6, int renorm_interval = 10,
                                  double state_box = 1e6, int perturbed_dim = 0);

/// RMS of pointwise Euclidean deviations between two equally long
/// position sequences.
double control_error_rms(const std::vector<Eigen::Vector2d>& actual,
                         const std::vector<Eigen::Vector2d>& reference);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool defined = false;
};

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom; two-sided p from the t CDF (continued-fraction incomplete beta).
TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Wilcoxon signed-rank test with the tie-corrected normal approximation.
/// Requires at least 6 nonzero-difference pairs.
TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

/// Cohen's d: mean difference over pooled standard deviation.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

/// Regularized incomplete beta I_x(a, b), exposed for the statistics tests.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace marlcc::metrics
