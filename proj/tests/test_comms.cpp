#include <doctest.h>

#include <cmath>

#include "marlcc/comms.hpp"
#include "marlcc/rng.hpp"

using namespace marlcc;
using namespace marlcc::comms;

namespace {

CommGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    CommGraph g;
    g.n_agents = n;
    g.adjacency = Eigen::MatrixXd::Zero(n, n);
    for (auto [i, j] : edges) {
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
    }
    return g;
}

}  // namespace

TEST_CASE("build_graph applies the closed-ball rule") {
    std::vector<Eigen::Vector2d> two{{0.0, 0.0}, {50.0, 0.0}};
    CHECK(build_graph(two, 100.0).adjacency(0, 1) == 1.0);

    std::vector<Eigen::Vector2d> far{{0.0, 0.0}, {150.0, 0.0}};
    CHECK(build_graph(far, 100.0).adjacency(0, 1) == 0.0);

    // boundary is inside (closed ball)
    std::vector<Eigen::Vector2d> edge{{0.0, 0.0}, {100.0, 0.0}};
    CHECK(build_graph(edge, 100.0).adjacency(0, 1) == 1.0);

    // collinear at 0, 80, 160: path graph
    std::vector<Eigen::Vector2d> line{{0.0, 0.0}, {80.0, 0.0}, {160.0, 0.0}};
    const CommGraph p3 = build_graph(line, 100.0);
    CHECK(p3.adjacency(0, 1) == 1.0);
    CHECK(p3.adjacency(1, 2) == 1.0);
    CHECK(p3.adjacency(0, 2) == 0.0);
}

TEST_CASE("build_graph is permutation equivariant") {
    Rng rng(5);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({rng.uniform(0, 200), rng.uniform(0, 200)});
    const CommGraph g = build_graph(pts, 90.0);
    std::vector<int> perm{3, 1, 4, 0, 5, 2};
    std::vector<Eigen::Vector2d> permuted(6);
    for (int i = 0; i < 6; ++i) permuted[i] = pts[perm[i]];
    const CommGraph gp = build_graph(permuted, 90.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            CHECK(gp.adjacency(i, j) == g.adjacency(perm[i], perm[j]));
        }
    }
}

TEST_CASE("metropolis weights on the path graph P3") {
    const CommGraph p3 = graph_from_edges(3, {{0, 1}, {1, 2}});
    const Eigen::MatrixXd w = metropolis_weights(p3);
    // degrees 1,2,1: w01 = w12 = 1/3, diagonals 2/3, 1/3, 2/3
    CHECK(w(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(w(1, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(w(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(w(2, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(w.row(i).sum() - 1.0) < 1e-12);
        CHECK(std::abs(w.col(i).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("metropolis weights trivial cases") {
    CHECK(metropolis_weights(graph_from_edges(1, {}))(0, 0) == 1.0);
    const Eigen::MatrixXd k3 =
        metropolis_weights(graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}}));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(k3(i, j) == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("metropolis spectral structure") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(6));
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng.uniform() < 0.4) edges.emplace_back(i, j);
            }
        }
        const CommGraph g = graph_from_edges(n, edges);
        const Eigen::MatrixXd w = metropolis_weights(g);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
        const auto& ev = es.eigenvalues();
        CHECK(std::abs(ev.cwiseAbs().maxCoeff() - 1.0) < 1e-12);  // spectral radius 1
        CHECK((w * Eigen::VectorXd::Ones(n) - Eigen::VectorXd::Ones(n)).norm() < 1e-12);
        // second-largest modulus < 1 iff connected
        std::vector<double> mags(ev.data(), ev.data() + n);
        std::sort(mags.begin(), mags.end(),
                  [](double a, double b) { return std::abs(a) > std::abs(b); });
        const double sigma2 = n > 1 ? std::abs(mags[1]) : 0.0;
        const bool connected = component_count(g) == 1;
        if (connected) {
            CHECK(sigma2 < 1.0 - 1e-9);
        } else {
            CHECK(sigma2 == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("transmit respects the degenerate loss probabilities") {
    Rng rng(23);
    ChannelModel always_lost;
    always_lost.loss_probability = 1.0 - 1e-12;  // contract keeps p_loss < 1
    Message m;
    m.send_time = 2.0;
    for (int i = 0; i < 100; ++i) CHECK(transmit(m, always_lost, rng).dropped);

    ChannelModel deterministic;
    deterministic.loss_probability = 0.0;
    deterministic.delay_std = 0.0;
    const Message out = transmit(m, deterministic, rng);
    CHECK_FALSE(out.dropped);
    CHECK(out.deliver_time == doctest::Approx(2.050).epsilon(1e-12));
}

TEST_CASE("transmit statistics at the default channel") {
    Rng rng(31);
    ChannelModel ch;  // defaults: 50 +/- 10 ms truncated to [0, 100] ms, 5% loss
    const int n = 100000;
    int dropped = 0;
    double delay_sum = 0.0;
    Message m;
    m.send_time = 0.0;
    for (int i = 0; i < n; ++i) {
        const Message out = transmit(m, ch, rng);
        if (out.dropped) {
            ++dropped;
        } else {
            const double d = out.deliver_time - out.send_time;
            REQUIRE(d >= 0.0);
            REQUIRE(d <= ch.delay_max);
            delay_sum += d;
        }
    }
    const double drop_fraction = static_cast<double>(dropped) / n;
    CHECK(drop_fraction > 0.04);
    CHECK(drop_fraction < 0.06);
    const double mean_delay = delay_sum / (n - dropped);
    CHECK(mean_delay > 0.048);
    CHECK(mean_delay < 0.052);
}

TEST_CASE("transmit is reproducible under the same seed") {
    ChannelModel ch;
    Message m;
    m.send_time = 1.0;
    Rng a(77), b(77);
    for (int i = 0; i < 1000; ++i) {
        const Message ma = transmit(m, ch, a);
        const Message mb = transmit(m, ch, b);
        CHECK(ma.dropped == mb.dropped);
        CHECK(ma.deliver_time == mb.deliver_time);
    }
}

TEST_CASE("deliver_due thresholds and tie-breaks") {
    std::vector<Message> box;
    CHECK(deliver_due(box, 10.0).empty());

    Message m1;
    m1.sender = 0;
    m1.deliver_time = 1.0;
    Message m2;
    m2.sender = 0;
    m2.deliver_time = 2.0;
    box = {m2, m1};
    const auto due = deliver_due(box, 1.5);
    REQUIRE(due.size() == 1);
    CHECK(due[0].deliver_time == 1.0);
    REQUIRE(box.size() == 1);
    CHECK(box[0].deliver_time == 2.0);

    // same due time: sender order breaks the tie
    Message a;
    a.sender = 3;
    a.deliver_time = 1.0;
    Message b;
    b.sender = 1;
    b.deliver_time = 1.0;
    box = {a, b};
    const auto tied = deliver_due(box, 1.0);
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].sender == 1);
    CHECK(tied[1].sender == 3);
}

TEST_CASE("algebraic connectivity of the canonical graphs") {
    // P3 Laplacian spectrum {0, 1, 3}; K3 spectrum {0, 3, 3}
    CHECK(algebraic_connectivity(graph_from_edges(3, {{0, 1}, {1, 2}})) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(algebraic_connectivity(graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}})) ==
          doctest::Approx(3.0).epsilon(1e-8));
    CHECK(algebraic_connectivity(graph_from_edges(2, {})) == 0.0);
}

TEST_CASE("lambda2 > 0 iff connected (component-count oracle)") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        const double density = rng.uniform();
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng.uniform() < density) edges.emplace_back(i, j);
            }
        }
        const CommGraph g = graph_from_edges(n, edges);
        const bool connected = component_count(g) == 1;
        const double l2 = algebraic_connectivity(g);
        if (connected) {
            CHECK(l2 > 0.0);
        } else {
            CHECK(l2 == 0.0);
        }
    }
}

TEST_CASE("delay quantization to whole ticks") {
    CHECK(quantize_delay_ticks(0.0, 0.1) == 0);
    CHECK(quantize_delay_ticks(0.050, 0.1) == 1);
    CHECK(quantize_delay_ticks(0.100, 0.1) == 1);
    CHECK(quantize_delay_ticks(0.101, 0.1) == 2);
}
