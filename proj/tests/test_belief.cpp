#include <doctest.h>

#include <cmath>

#include "marlcc/belief.hpp"
#include "marlcc/comms.hpp"
#include "marlcc/error.hpp"
#include "marlcc/rng.hpp"

using namespace marlcc;
using namespace marlcc::belief;

namespace {

dynamics::AffineSystem zero_system(int n) {
    dynamics::AffineSystem s;
    s.state_dim = n;
    s.input_dim = 1;
    s.output_dim = 1;
    s.drift = [n](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Zero(n)); };
    s.input_map = [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(n, 1); };
    s.output = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.head(1)); };
    return s;
}

ObservationModel scalar_identity(double variance) {
    ObservationModel m;
    m.output = [](const Eigen::VectorXd& x) { return x; };
    m.covariance = Eigen::MatrixXd::Constant(1, 1, variance);
    return m;
}

Eigen::MatrixXd scalar_support(const std::vector<double>& pts) {
    Eigen::MatrixXd s(1, pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) s(0, i) = pts[i];
    return s;
}

DiscreteBelief make_discrete(const std::vector<double>& support,
                             const std::vector<double>& probs) {
    DiscreteBelief b;
    b.support = scalar_support(support);
    b.probs = Eigen::Map<const Eigen::VectorXd>(probs.data(), probs.size());
    return b;
}

}  // namespace

TEST_CASE("predict: zero dynamics and zero noise is the identity") {
    Rng rng(1);
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Constant(1, 3.0), 50);
    const ParticleBelief out = predict(b, zero_system(1), Eigen::VectorXd::Zero(1), 0.1,
                                       Eigen::MatrixXd::Zero(1, 1), rng);
    CHECK((out.particles - b.particles).norm() == 0.0);
    CHECK((out.weights - b.weights).norm() == 0.0);
}

TEST_CASE("predict: constant drift shifts every particle") {
    Rng rng(2);
    dynamics::AffineSystem s = zero_system(1);
    s.drift = [](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Ones(1)); };
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Zero(1), 20);
    const ParticleBelief out =
        predict(b, s, Eigen::VectorXd::Zero(1), 0.1, Eigen::MatrixXd::Zero(1, 1), rng);
    for (int k = 0; k < 20; ++k) CHECK(out.particles(0, k) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("predict: pure-noise transitions grow the variance additively") {
    Rng rng(3);
    const int n_particles = 10000;
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Zero(1), n_particles);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Constant(1, 1, 0.04);
    auto variance = [](const ParticleBelief& pb) {
        const double mean = pb.particles.row(0).mean();
        return (pb.particles.row(0).array() - mean).square().mean();
    };
    double prev = variance(b);
    double growth_sum = 0.0;
    const int steps = 10;
    for (int step = 0; step < steps; ++step) {
        b = predict(b, zero_system(1), Eigen::VectorXd::Zero(1), 0.1, q, rng);
        const double cur = variance(b);
        growth_sum += cur - prev;
        prev = cur;
    }
    CHECK(growth_sum / steps == doctest::Approx(0.04).epsilon(0.10));
}

TEST_CASE("predict rejects a non-SPD noise covariance") {
    Rng rng(4);
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Zero(1), 5);
    const Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(predict(b, zero_system(1), Eigen::VectorXd::Zero(1), 0.1, bad, rng),
                    ModelConfigError);
}

TEST_CASE("update: uninformative likelihood keeps the weights") {
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Zero(1), 4);
    b.weights << 0.1, 0.2, 0.3, 0.4;
    // all particles identical, so every likelihood matches
    const ParticleBelief out = update(b, Eigen::VectorXd::Constant(1, 0.7),
                                      scalar_identity(1.0));
    CHECK((out.weights - b.weights).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_FALSE(out.degenerate);
}

TEST_CASE("update: two-particle Gaussian posterior, hand normalized") {
    ParticleBelief b;
    b.particles = Eigen::MatrixXd(1, 2);
    b.particles << 0.0, 1.0;
    b.weights = Eigen::VectorXd::Constant(2, 0.5);
    const ParticleBelief out = update(b, Eigen::VectorXd::Constant(1, 1.0),
                                      scalar_identity(1.0));
    // w0 ~ exp(-0.5), w1 ~ exp(0) -> (0.37754, 0.62246)
    CHECK(out.weights[0] == doctest::Approx(0.3775406687981454).epsilon(1e-4));
    CHECK(out.weights[1] == doctest::Approx(0.6224593312018546).epsilon(1e-4));
    CHECK(out.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("update: sharp observation concentrates on the nearest particle") {
    ParticleBelief b;
    b.particles = Eigen::MatrixXd(1, 5);
    b.particles << -2.0, -1.0, 0.35, 1.0, 2.0;
    b.weights = Eigen::VectorXd::Constant(5, 0.2);
    const ParticleBelief out = update(b, Eigen::VectorXd::Constant(1, 0.3),
                                      scalar_identity(1e-6));
    Eigen::Index argmax;
    out.weights.maxCoeff(&argmax);
    CHECK(argmax == 2);
    CHECK(out.weights[2] > 0.999);
}

TEST_CASE("update: total underflow resets to uniform with the degeneracy flag") {
    ParticleBelief b;
    b.particles = Eigen::MatrixXd(1, 3);
    b.particles << 0.0, 0.1, 0.2;
    b.weights = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    // log-space weights only hit -inf when the quadratic form itself
    // overflows, i.e. the observation is absurdly far from every particle
    const ParticleBelief out = update(b, Eigen::VectorXd::Constant(1, 1e160),
                                      scalar_identity(1.0));
    CHECK(out.degenerate);
    for (int k = 0; k < 3; ++k) CHECK(out.weights[k] == doctest::Approx(1.0 / 3.0));

    // a merely outlying observation is still resolved in log space
    const ParticleBelief ok = update(b, Eigen::VectorXd::Constant(1, 3e6),
                                     scalar_identity(1e-6));
    CHECK_FALSE(ok.degenerate);
    CHECK(ok.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("update is permutation equivariant") {
    ParticleBelief b;
    b.particles = Eigen::MatrixXd(1, 4);
    b.particles << 0.3, -1.0, 2.0, 0.9;
    b.weights = Eigen::VectorXd(4);
    b.weights << 0.1, 0.4, 0.2, 0.3;
    const ParticleBelief out = update(b, Eigen::VectorXd::Constant(1, 0.5),
                                      scalar_identity(0.5));
    const std::vector<int> perm{2, 0, 3, 1};
    ParticleBelief pb;
    pb.particles = Eigen::MatrixXd(1, 4);
    pb.weights = Eigen::VectorXd(4);
    for (int k = 0; k < 4; ++k) {
        pb.particles(0, k) = b.particles(0, perm[k]);
        pb.weights[k] = b.weights[perm[k]];
    }
    const ParticleBelief pout = update(pb, Eigen::VectorXd::Constant(1, 0.5),
                                       scalar_identity(0.5));
    for (int k = 0; k < 4; ++k) {
        CHECK(pout.weights[k] == doctest::Approx(out.weights[perm[k]]).epsilon(1e-12));
    }
}

TEST_CASE("resample: uniform weights are left alone") {
    Rng rng(5);
    ParticleBelief b = make_particle_belief(Eigen::VectorXd::Zero(1), 100);
    const ParticleBelief out = resample(b, rng);
    CHECK((out.particles - b.particles).norm() == 0.0);
}

TEST_CASE("resample: a single dominant particle takes over") {
    Rng rng(6);
    ParticleBelief b;
    b.particles = Eigen::MatrixXd(1, 10);
    b.particles << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
    b.weights = Eigen::VectorXd::Zero(10);
    b.weights[7] = 1.0;
    const ParticleBelief out = resample(b, rng);
    for (int k = 0; k < 10; ++k) {
        CHECK(out.particles(0, k) == 7.0);
        CHECK(out.weights[k] == doctest::Approx(0.1));
    }
}

TEST_CASE("resample: systematic counts track the weight split") {
    // 0.7 of the mass on value A (first 1000 particles), 0.3 on value B
    const int n = 10000;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        ParticleBelief b;
        b.particles = Eigen::MatrixXd(1, n);
        b.weights = Eigen::VectorXd(n);
        for (int k = 0; k < n; ++k) {
            const bool first = k < 1000;
            b.particles(0, k) = first ? 1.0 : 2.0;
            b.weights[k] = first ? 0.7 / 1000 : 0.3 / 9000;
        }
        REQUIRE(b.effective_sample_size() < n / 2.0);
        const ParticleBelief out = resample(b, rng);
        const int count_a =
            static_cast<int>((out.particles.row(0).array() == 1.0).count());
        CHECK(count_a > 7000 - 150);
        CHECK(count_a < 7000 + 150);
    }
}

TEST_CASE("fuse: fixed point and uniformity") {
    const DiscreteBelief q = make_discrete({0, 1, 2}, {0.2, 0.5, 0.3});
    Eigen::VectorXd w(3);
    w << 0.25, 0.5, 0.25;
    const DiscreteBelief out = fuse({q, q, q}, w);
    CHECK((out.probs - q.probs).cwiseAbs().maxCoeff() < 1e-12);

    const DiscreteBelief u = make_discrete({0, 1}, {0.5, 0.5});
    Eigen::VectorXd w2(2);
    w2 << 0.7, 0.3;
    const DiscreteBelief out2 = fuse({u, u}, w2);
    CHECK(out2.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fuse: symmetric geometric mean of opposed beliefs is uniform") {
    const DiscreteBelief b1 = make_discrete({0, 1}, {0.8, 0.2});
    const DiscreteBelief b2 = make_discrete({0, 1}, {0.2, 0.8});
    Eigen::VectorXd w(2);
    w << 0.5, 0.5;
    const DiscreteBelief out = fuse({b1, b2}, w);
    CHECK(out.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fuse: zeros are absorbing and inputs need a common support") {
    const DiscreteBelief b1 = make_discrete({0, 1, 2}, {0.5, 0.5, 0.0});
    const DiscreteBelief b2 = make_discrete({0, 1, 2}, {0.25, 0.5, 0.25});
    Eigen::VectorXd w(2);
    w << 0.5, 0.5;
    const DiscreteBelief out = fuse({b1, b2}, w);
    CHECK(out.probs[2] == 0.0);
    CHECK(out.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));

    const DiscreteBelief other = make_discrete({0, 1}, {0.5, 0.5});
    CHECK_THROWS_AS(fuse({b1, other}, w), FusionSupportError);
}

TEST_CASE("fuse is invariant to positive rescaling of an input") {
    DiscreteBelief b1 = make_discrete({0, 1, 2}, {0.6, 0.3, 0.1});
    const DiscreteBelief b2 = make_discrete({0, 1, 2}, {0.1, 0.2, 0.7});
    Eigen::VectorXd w(2);
    w << 0.4, 0.6;
    const DiscreteBelief base = fuse({b1, b2}, w);
    b1.probs *= 37.5;  // unnormalized input: fusion renormalizes anyway
    const DiscreteBelief scaled = fuse({b1, b2}, w);
    CHECK((base.probs - scaled.probs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fuse consensus contracts at the second eigenvalue rate") {
    // complete bipartite K3,3: Metropolis weights have sigma2 = 1/2
    comms::CommGraph g;
    g.n_agents = 6;
    g.adjacency = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 3; ++i) {
        for (int j = 3; j < 6; ++j) {
            g.adjacency(i, j) = 1.0;
            g.adjacency(j, i) = 1.0;
        }
    }
    const Eigen::MatrixXd w = comms::metropolis_weights(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    std::vector<double> mags(es.eigenvalues().data(), es.eigenvalues().data() + 6);
    std::sort(mags.begin(), mags.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
    const double sigma2 = std::abs(mags[1]);

    const int support_size = 8;
    Rng rng(9);
    std::vector<DiscreteBelief> beliefs(6);
    Eigen::MatrixXd support(1, support_size);
    for (int k = 0; k < support_size; ++k) support(0, k) = k;
    for (auto& b : beliefs) {
        b.support = support;
        b.probs = Eigen::VectorXd(support_size);
        for (int k = 0; k < support_size; ++k) b.probs[k] = rng.uniform(0.05, 1.0);
        b.probs /= b.probs.sum();
    }

    auto disagreement = [&]() {
        // centered log beliefs evolve linearly under fusion
        std::vector<Eigen::VectorXd> logs;
        for (const auto& b : beliefs) {
            Eigen::VectorXd l = b.probs.array().log();
            logs.push_back(l.array() - l.mean());
        }
        double worst = 0.0;
        for (int i = 0; i < 6; ++i) {
            for (int j = i + 1; j < 6; ++j) {
                worst = std::max(worst, (logs[i] - logs[j]).cwiseAbs().maxCoeff());
            }
        }
        return worst;
    };

    const double d0 = disagreement();
    std::vector<double> history{d0};
    for (int round = 0; round < 50; ++round) {
        std::vector<DiscreteBelief> next(6);
        for (int i = 0; i < 6; ++i) next[i] = fuse(beliefs, w.row(i));
        beliefs = std::move(next);
        history.push_back(disagreement());
    }
    CHECK(history.back() < 1e-6 * d0);
    // two-round geometric contraction after the transient matches sigma2
    const double estimate = std::pow(history[16] / history[8], 1.0 / 8.0);
    CHECK(estimate == doctest::Approx(sigma2).epsilon(0.05));
}

TEST_CASE("exact bayes filter: identity transition, uninformative emission") {
    const Eigen::MatrixXd t = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd e = Eigen::MatrixXd::Constant(3, 2, 0.5);
    DiscreteBelief prior = make_discrete({0, 1, 2}, {0.2, 0.5, 0.3});
    const auto posts = exact_bayes_filter(t, e, prior, {0, 1, 0, 1});
    for (const auto& p : posts) {
        CHECK((p.probs - prior.probs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("exact bayes filter: hand-computed two-state step") {
    Eigen::MatrixXd t(2, 2);
    t << 0.9, 0.1, 0.1, 0.9;
    Eigen::MatrixXd e(2, 2);  // P(z=A|s1)=0.8, P(z=A|s2)=0.3
    e << 0.8, 0.2, 0.3, 0.7;
    DiscreteBelief prior = make_discrete({0, 1}, {0.5, 0.5});
    const auto posts = exact_bayes_filter(t, e, prior, {0});
    REQUIRE(posts.size() == 1);
    CHECK(posts[0].probs[0] == doctest::Approx(0.7272727272727).epsilon(1e-4));
    CHECK(posts[0].probs[1] == doctest::Approx(0.2727272727272).epsilon(1e-4));
}

TEST_CASE("exact bayes filter: deterministic cycle is tracked exactly") {
    Eigen::MatrixXd t(3, 3);
    t << 0, 1, 0, 0, 0, 1, 1, 0, 0;  // s -> s+1 mod 3
    Eigen::MatrixXd e = Eigen::MatrixXd::Identity(3, 3);  // z = s exactly
    DiscreteBelief prior = make_discrete({0, 1, 2}, {1.0, 0.0, 0.0});
    const auto posts = exact_bayes_filter(t, e, prior, {1, 2, 0, 1});
    CHECK(posts[0].probs[1] == 1.0);
    CHECK(posts[1].probs[2] == 1.0);
    CHECK(posts[2].probs[0] == 1.0);
    CHECK(posts[3].probs[1] == 1.0);
}

TEST_CASE("exact bayes filter rejects impossible observations") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd e(2, 2);
    e << 1.0, 0.0, 1.0, 0.0;  // z=1 can never occur
    DiscreteBelief prior = make_discrete({0, 1}, {0.5, 0.5});
    CHECK_THROWS_AS(exact_bayes_filter(t, e, prior, {1}), ImpossibleObservationError);
}

TEST_CASE("belief features: mean and spread") {
    ParticleBelief all_same = make_particle_belief(Eigen::VectorXd::Constant(2, 4.0), 8);
    const Eigen::VectorXd f0 = belief_features(all_same);
    CHECK(f0[0] == 4.0);
    CHECK(f0[1] == 4.0);
    CHECK(f0[2] == 0.0);
    CHECK(f0[3] == 0.0);

    ParticleBelief two;
    two.particles = Eigen::MatrixXd(1, 2);
    two.particles << 0.0, 2.0;
    two.weights = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd f1 = belief_features(two);
    CHECK(f1[0] == doctest::Approx(1.0));
    CHECK(f1[1] == doctest::Approx(1.0));  // population std

    ParticleBelief weighted;
    weighted.particles = Eigen::MatrixXd(1, 2);
    weighted.particles << 5.0, 99.0;
    weighted.weights = Eigen::VectorXd(2);
    weighted.weights << 1.0, 0.0;
    const Eigen::VectorXd f2 = belief_features(weighted);
    CHECK(f2[0] == doctest::Approx(5.0));
    CHECK(f2[1] == doctest::Approx(0.0));
}

TEST_CASE("weights stay normalized through the filter cycle") {
    Rng rng(12);
    ParticleBelief b = sample_gaussian_belief(Eigen::VectorXd::Zero(1),
                                              Eigen::VectorXd::Ones(1), 500, rng);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Constant(1, 1, 0.01);
    for (int step = 0; step < 20; ++step) {
        b = predict(b, zero_system(1), Eigen::VectorXd::Zero(1), 0.1, q, rng);
        CHECK(std::abs(b.weights.sum() - 1.0) < 1e-9);
        b = update(b, Eigen::VectorXd::Constant(1, rng.normal()), scalar_identity(0.5));
        CHECK(std::abs(b.weights.sum() - 1.0) < 1e-9);
        b = resample(b, rng);
        CHECK(std::abs(b.weights.sum() - 1.0) < 1e-9);
        CHECK(b.effective_sample_size() >= 1.0);
        CHECK(b.effective_sample_size() <= 500.0 + 1e-9);
    }
}

TEST_CASE("particle filter tracks the exact filter on a 5-state chain") {
    // Quantized Gaussian random walk on cell centers {0..4}: state' =
    // snap(state + noise), observation z ~ N(center, sigma_o^2). The chain's
    // transition matrix is computed from the Gaussian CDF between cell
    // midpoints, which makes the discrete filter the exact posterior of the
    // particle system's own model.
    const int cells = 5;
    const double sigma_p = 0.8;
    const double sigma_o = 0.7;
    auto snap = [&](double x) {
        return std::min<double>(cells - 1, std::max(0.0, std::round(x)));
    };
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    Eigen::MatrixXd t(cells, cells);
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            const double lo = j == 0 ? -1e9 : (j - 0.5 - i) / sigma_p;
            const double hi = j == cells - 1 ? 1e9 : (j + 0.5 - i) / sigma_p;
            t(i, j) = phi(hi) - phi(lo);
        }
    }

    const int n_particles = 10000;
    const int n_steps = 100;
    double worst_mean_tv = 0.0;
    std::vector<double> tv_sums(n_steps, 0.0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng world_rng(derive_seed(seed, 0));
        Rng pf_rng(derive_seed(seed, 1));
        int state = 2;
        Eigen::VectorXd exact = Eigen::VectorXd::Constant(cells, 1.0 / cells);
        ParticleBelief pf;
        pf.particles = Eigen::MatrixXd::Zero(1, n_particles);
        for (int k = 0; k < n_particles; ++k) {
            pf.particles(0, k) = static_cast<double>(pf_rng.uniform_int(cells));
        }
        pf.weights = Eigen::VectorXd::Constant(n_particles, 1.0 / n_particles);

        for (int step = 0; step < n_steps; ++step) {
            // world transition + observation
            state = static_cast<int>(snap(state + sigma_p * world_rng.normal()));
            const double z = state + sigma_o * world_rng.normal();

            // particle filter on the same model
            pf = predict(pf, zero_system(1), Eigen::VectorXd::Zero(1), 0.1,
                         Eigen::MatrixXd::Constant(1, 1, sigma_p * sigma_p), pf_rng);
            for (int k = 0; k < n_particles; ++k) pf.particles(0, k) = snap(pf.particles(0, k));
            pf = update(pf, Eigen::VectorXd::Constant(1, z),
                        scalar_identity(sigma_o * sigma_o));
            pf = resample(pf, pf_rng);

            // exact filter with the per-step Gaussian likelihood
            Eigen::VectorXd like(cells);
            for (int c = 0; c < cells; ++c) {
                const double r = (z - c) / sigma_o;
                like[c] = std::exp(-0.5 * r * r);
            }
            exact = forward_filter_step(exact, t, like);

            Eigen::MatrixXd support(1, cells);
            for (int c = 0; c < cells; ++c) support(0, c) = c;
            const DiscreteBelief hist = project_to_grid(pf, support);
            tv_sums[step] += total_variation(hist.probs, exact);
        }
    }
    for (int step = 0; step < n_steps; ++step) {
        worst_mean_tv = std::max(worst_mean_tv, tv_sums[step] / 10.0);
    }
    CHECK(worst_mean_tv < 0.05);
}
