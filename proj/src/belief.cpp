#include "marlcc/belief.hpp"

#include <cmath>
#include <limits>

#include "marlcc/error.hpp"

namespace marlcc::belief {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& logw, bool* underflow) {
    const double m = logw.maxCoeff();
    if (underflow) *underflow = false;
    if (!std::isfinite(m)) {
        if (underflow) *underflow = true;
        return Eigen::VectorXd::Constant(logw.size(), 1.0 / static_cast<double>(logw.size()));
    }
    Eigen::VectorXd w = (logw.array() - m).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        if (underflow) *underflow = true;
        return Eigen::VectorXd::Constant(logw.size(), 1.0 / static_cast<double>(logw.size()));
    }
    return w / total;
}

ParticleBelief make_particle_belief(const Eigen::VectorXd& center, int n_particles) {
    ParticleBelief b;
    b.particles = center.replicate(1, n_particles);
    b.weights = Eigen::VectorXd::Constant(n_particles, 1.0 / n_particles);
    return b;
}

ParticleBelief sample_gaussian_belief(const Eigen::VectorXd& center,
                                      const Eigen::VectorXd& stddev, int n_particles,
                                      Rng& rng) {
    ParticleBelief b;
    b.particles.resize(center.size(), n_particles);
    for (int k = 0; k < n_particles; ++k) {
        for (Eigen::Index d = 0; d < center.size(); ++d) {
            b.particles(d, k) = center[d] + stddev[d] * rng.normal();
        }
    }
    b.weights = Eigen::VectorXd::Constant(n_particles, 1.0 / n_particles);
    return b;
}

ParticleBelief predict(const ParticleBelief& b, const dynamics::AffineSystem& system,
                       const Eigen::VectorXd& u, double dt,
                       const Eigen::MatrixXd& process_noise, Rng& rng) {
    const Eigen::Index n = b.particles.rows();
    Eigen::MatrixXd noise_root;
    const bool has_noise = process_noise.size() > 0 && process_noise.norm() > 0.0;
    if (has_noise) {
        Eigen::LLT<Eigen::MatrixXd> llt(process_noise);
        if (llt.info() != Eigen::Success) {
            throw ModelConfigError("process noise covariance is not symmetric positive definite");
        }
        noise_root = llt.matrixL();
    }
    ParticleBelief out = b;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        Eigen::VectorXd x = dynamics::rk4_step(system, b.particles.col(k), u, dt);
        if (has_noise) x.noalias() += noise_root * rng.normal_vector(n);
        out.particles.col(k) = x;
    }
    return out;
}

ParticleBelief update(const ParticleBelief& b, const Eigen::VectorXd& z,
                      const ObservationModel& model) {
    Eigen::LLT<Eigen::MatrixXd> llt(model.covariance);
    if (llt.info() != Eigen::Success) {
        throw ModelConfigError("observation covariance is not symmetric positive definite");
    }
    ParticleBelief out = b;
    Eigen::VectorXd logw(b.size());
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        const Eigen::VectorXd r = z - model.output(b.particles.col(k));
        const Eigen::VectorXd s = llt.matrixL().solve(r);
        const double logp = b.weights[k] > 0.0 ? std::log(b.weights[k]) : kNegInf;
        logw[k] = logp - 0.5 * s.squaredNorm();
    }
    bool underflow = false;
    out.weights = normalize_log_weights(logw, &underflow);
    out.degenerate = underflow;
    return out;
}

ParticleBelief resample(const ParticleBelief& b, Rng& rng) {
    const Eigen::Index n = b.size();
    if (b.effective_sample_size() >= 0.5 * static_cast<double>(n)) return b;
    ParticleBelief out;
    out.particles.resize(b.particles.rows(), n);
    out.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const double step = 1.0 / static_cast<double>(n);
    double pointer = rng.uniform() * step;
    double cumulative = b.weights[0];
    Eigen::Index src = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        while (pointer > cumulative && src + 1 < n) {
            ++src;
            cumulative += b.weights[src];
        }
        out.particles.col(k) = b.particles.col(src);
        pointer += step;
    }
    return out;
}

Eigen::VectorXd weighted_mean(const ParticleBelief& b) {
    return b.particles * b.weights;
}

Eigen::VectorXd belief_features(const ParticleBelief& b) {
    const Eigen::Index n = b.particles.rows();
    const Eigen::VectorXd mean = weighted_mean(b);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        var.array() += b.weights[k] * (b.particles.col(k) - mean).array().square();
    }
    Eigen::VectorXd out(2 * n);
    out.head(n) = mean;
    out.tail(n) = var.cwiseMax(0.0).cwiseSqrt();
    return out;
}

DiscreteBelief project_to_grid(const ParticleBelief& b, const Eigen::MatrixXd& support) {
    DiscreteBelief d;
    d.support = support;
    d.probs = Eigen::VectorXd::Zero(support.cols());
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        Eigen::Index best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index g = 0; g < support.cols(); ++g) {
            const double dist = (support.col(g) - b.particles.col(k)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = g;
            }
        }
        d.probs[best] += b.weights[k];
    }
    const double total = d.probs.sum();
    if (total > 0.0) d.probs /= total;
    return d;
}

DiscreteBelief fuse(const std::vector<DiscreteBelief>& beliefs, const Eigen::VectorXd& weights) {
    if (beliefs.empty()) throw FusionSupportError("fuse requires at least one belief");
    if (static_cast<Eigen::Index>(beliefs.size()) != weights.size()) {
        throw FusionSupportError("fuse: weight count does not match belief count");
    }
    const auto& ref = beliefs.front().support;
    for (const auto& b : beliefs) {
        if (b.support.rows() != ref.rows() || b.support.cols() != ref.cols() ||
            (b.support - ref).cwiseAbs().maxCoeff() > 1e-12) {
            throw FusionSupportError("fuse: beliefs do not share a common support");
        }
    }
    const Eigen::Index k = ref.cols();
    Eigen::VectorXd logp = Eigen::VectorXd::Zero(k);
    for (std::size_t j = 0; j < beliefs.size(); ++j) {
        const double w = weights[static_cast<Eigen::Index>(j)];
        if (w == 0.0) continue;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double p = beliefs[j].probs[i];
            logp[i] += p > 0.0 ? w * std::log(p) : kNegInf;
        }
    }
    DiscreteBelief out;
    out.support = ref;
    out.probs = normalize_log_weights(logp);
    return out;
}

Eigen::VectorXd forward_filter_step(const Eigen::VectorXd& prior,
                                    const Eigen::MatrixXd& transition,
                                    const Eigen::VectorXd& likelihood) {
    Eigen::VectorXd predicted = transition.transpose() * prior;
    Eigen::VectorXd post = predicted.cwiseProduct(likelihood);
    const double total = post.sum();
    if (!(total > 0.0)) {
        throw ImpossibleObservationError("observation has zero likelihood under every state");
    }
    return post / total;
}

std::vector<DiscreteBelief> exact_bayes_filter(const Eigen::MatrixXd& transition,
                                               const Eigen::MatrixXd& emission,
                                               const DiscreteBelief& prior,
                                               const std::vector<int>& observations) {
    std::vector<DiscreteBelief> out;
    out.reserve(observations.size());
    Eigen::VectorXd p = prior.probs;
    for (int z : observations) {
        p = forward_filter_step(p, transition, emission.col(z));
        DiscreteBelief d;
        d.support = prior.support;
        d.probs = p;
        out.push_back(std::move(d));
    }
    return out;
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    return 0.5 * (p - q).cwiseAbs().sum();
}

}  // namespace marlcc::belief
