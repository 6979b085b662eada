#include <doctest.h>

#include <bit>
#include <cmath>

#include "marlcc/credit.hpp"
#include "marlcc/error.hpp"
#include "marlcc/rng.hpp"

using namespace marlcc;
using namespace marlcc::credit;

namespace {

CoalitionGame random_game(int n, Rng& rng) {
    std::vector<double> values(std::size_t{1} << n);
    for (auto& v : values) v = rng.uniform();
    values[0] = 0.0;
    return CoalitionGame(n, [values](CoalitionMask m) { return values[m]; });
}

CoalitionGame additive_game(const std::vector<double>& c) {
    return CoalitionGame(static_cast<int>(c.size()), [c](CoalitionMask m) {
        double total = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if ((m >> i) & 1u) total += c[i];
        }
        return total;
    });
}

}  // namespace

TEST_CASE("exact Shapley on the hand-enumerated 2-player game") {
    // v(0)=0, v({1})=1, v({2})=2, v({1,2})=4: orders (1,2) and (2,1) give
    // marginals (1,3) and (2,2), averaging to (1.5, 2.5)
    CoalitionGame g(2, [](CoalitionMask m) {
        switch (m) {
            case 0b00: return 0.0;
            case 0b01: return 1.0;
            case 0b10: return 2.0;
            default: return 4.0;
        }
    });
    const auto alloc = shapley_exact(g);
    CHECK(alloc.phi[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(alloc.phi[1] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(alloc.standard_errors[0] == 0.0);
    CHECK(alloc.oracle_calls == 4);  // memoized: each subset exactly once
}

TEST_CASE("exact Shapley of an additive game returns the constants") {
    const auto alloc = shapley_exact(additive_game({3.0, -1.0, 7.0}));
    CHECK(alloc.phi[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(alloc.phi[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(alloc.phi[2] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("exact Shapley splits the symmetric |S|^2 game equally") {
    CoalitionGame g(3, [](CoalitionMask m) {
        const double s = std::popcount(m);
        return s * s;
    });
    const auto alloc = shapley_exact(g);
    for (int i = 0; i < 3; ++i) CHECK(alloc.phi[i] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("exact Shapley size guard names the alternative") {
    CoalitionGame g(21, [](CoalitionMask) { return 0.0; });
    CHECK_THROWS_WITH_AS(shapley_exact(g), doctest::Contains("Monte-Carlo"), SizeError);
}

TEST_CASE("efficiency, symmetry, dummy and additivity axioms") {
    Rng rng(100);
    // efficiency on 200 random games, N in 2..8
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        CoalitionGame g = random_game(n, rng);
        const auto alloc = shapley_exact(g);
        double total = 0.0;
        for (double p : alloc.phi) total += p;
        const double target = g.value(g.grand_coalition()) - g.value(0);
        CHECK(std::abs(total - target) <= 1e-9 * std::max(1.0, std::abs(target)));
    }

    // symmetry: players 0 and 1 interchangeable by construction
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4;
        std::vector<double> base(std::size_t{1} << n);
        for (auto& v : base) v = rng.uniform();
        auto canonical = [](CoalitionMask m) {
            // swap the roles of bits 0 and 1 into a canonical order
            const bool b0 = m & 1u, b1 = m & 2u;
            CoalitionMask rest = m & ~CoalitionMask{3};
            return rest | (b0 || b1 ? 1u : 0u) | (b0 && b1 ? 2u : 0u);
        };
        CoalitionGame g(n, [base, canonical](CoalitionMask m) { return base[canonical(m)]; });
        const auto alloc = shapley_exact(g);
        CHECK(std::abs(alloc.phi[0] - alloc.phi[1]) < 1e-9);
    }

    // dummy: player 2 never changes the value
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4;
        std::vector<double> base(std::size_t{1} << n);
        for (auto& v : base) v = rng.uniform();
        CoalitionGame g(n, [base](CoalitionMask m) { return base[m & ~CoalitionMask{4}]; });
        const auto alloc = shapley_exact(g);
        CHECK(std::abs(alloc.phi[2]) < 1e-12);
    }

    // additivity: phi(v1 + v2) = phi(v1) + phi(v2)
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5;
        std::vector<double> v1(std::size_t{1} << n), v2(v1.size());
        for (auto& v : v1) v = rng.uniform();
        for (auto& v : v2) v = rng.uniform();
        CoalitionGame g1(n, [v1](CoalitionMask m) { return v1[m]; });
        CoalitionGame g2(n, [v2](CoalitionMask m) { return v2[m]; });
        CoalitionGame gs(n, [v1, v2](CoalitionMask m) { return v1[m] + v2[m]; });
        const auto a1 = shapley_exact(g1);
        const auto a2 = shapley_exact(g2);
        const auto as = shapley_exact(gs);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(as.phi[i] - a1.phi[i] - a2.phi[i]) < 1e-9);
        }
    }
}

TEST_CASE("MC Shapley: single player is exact with zero variance") {
    CoalitionGame g(1, [](CoalitionMask m) { return m ? 5.0 : 2.0; });
    Rng rng(1);
    const auto alloc = shapley_mc(g, 10, rng);
    CHECK(alloc.phi[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(alloc.standard_errors[0] == 0.0);
}

TEST_CASE("MC Shapley: additive games are zero-variance for any M") {
    Rng rng(2);
    CoalitionGame g = additive_game({1.0, -2.0, 0.5, 4.0});
    const auto alloc = shapley_mc(g, 7, rng);
    CHECK(alloc.phi[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(alloc.phi[1] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(alloc.phi[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alloc.phi[3] == doctest::Approx(4.0).epsilon(1e-12));
    for (double se : alloc.standard_errors) CHECK(se < 1e-12);
}

TEST_CASE("MC Shapley concentrates around the exact values") {
    // exact enumeration is the brute-force oracle for the estimator
    Rng game_rng(300);
    int within = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> values(1 << 6);
        for (auto& v : values) v = game_rng.uniform();
        values[0] = 0.0;
        CoalitionGame exact_game(6, [&values](CoalitionMask m) { return values[m]; });
        const auto exact = shapley_exact(exact_game);
        CoalitionGame mc_game(6, [&values](CoalitionMask m) { return values[m]; });
        Rng rng(derive_seed(12345, trial));
        const auto mc = shapley_mc(mc_game, 10000, rng);
        bool all_within = true;
        for (int i = 0; i < 6; ++i) {
            if (std::abs(mc.phi[i] - exact.phi[i]) > 4.0 * mc.standard_errors[i]) {
                all_within = false;
            }
        }
        if (all_within) ++within;
    }
    CHECK(within >= 95);
}

TEST_CASE("MC estimator is unbiased at M = 1") {
    Rng game_rng(55);
    std::vector<double> values(1 << 5);
    for (auto& v : values) v = game_rng.uniform(-1.0, 1.0);
    values[0] = 0.0;
    CoalitionGame g(5, [&values](CoalitionMask m) { return values[m]; });
    const auto exact = shapley_exact(g);

    const int reps = 1000;
    std::vector<double> sum(5, 0.0), sumsq(5, 0.0);
    for (int rep = 0; rep < reps; ++rep) {
        CoalitionGame fresh(5, [&values](CoalitionMask m) { return values[m]; });
        Rng rng(derive_seed(777, rep));
        const auto est = shapley_mc(fresh, 1, rng);
        for (int i = 0; i < 5; ++i) {
            sum[i] += est.phi[i];
            sumsq[i] += est.phi[i] * est.phi[i];
        }
    }
    for (int i = 0; i < 5; ++i) {
        const double mean = sum[i] / reps;
        const double var = (sumsq[i] - reps * mean * mean) / (reps - 1);
        const double grand_se = std::sqrt(var / reps);
        CHECK(std::abs(mean - exact.phi[i]) <= 4.0 * std::max(grand_se, 1e-12));
    }
}

TEST_CASE("MC sampling touches only permutation prefixes") {
    const int n = 6;
    const int m = 50;
    // every queryable mask must be a prefix of some permutation; track the
    // raw oracle invocations (memoization keeps them <= M(N+1))
    CoalitionGame g(n, [](CoalitionMask mask) {
        return static_cast<double>(std::popcount(mask));
    });
    Rng rng(9);
    const auto alloc = shapley_mc(g, m, rng);
    CHECK(alloc.oracle_calls <= static_cast<long>(m) * (n + 1));
    CHECK(alloc.phi[0] == doctest::Approx(1.0).epsilon(1e-12));  // cardinality game
}

TEST_CASE("factorized Shapley: empty neighborhoods give singleton marginals") {
    std::vector<LocalGame> games;
    for (int i = 0; i < 3; ++i) {
        LocalGame lg;
        lg.owner = i;
        lg.members = {i};
        const double vi = 1.0 + i;
        lg.value = [vi](CoalitionMask m) { return m ? vi : 0.5; };
        games.push_back(std::move(lg));
    }
    const auto alloc = shapley_factorized(games);
    CHECK(alloc.phi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alloc.phi[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(alloc.phi[2] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(method_name(alloc.method) == "factorized");
}

TEST_CASE("factorized Shapley: cardinality local games on the 6-ring") {
    std::vector<LocalGame> games;
    for (int i = 0; i < 6; ++i) {
        LocalGame lg;
        lg.owner = i;
        lg.members = {(i + 5) % 6, i, (i + 1) % 6};
        std::sort(lg.members.begin(), lg.members.end());
        lg.value = [](CoalitionMask m) { return static_cast<double>(std::popcount(m)); };
        games.push_back(std::move(lg));
    }
    const auto alloc = shapley_factorized(games);
    for (int i = 0; i < 6; ++i) CHECK(alloc.phi[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("factorized Shapley rejects oversized neighborhoods") {
    LocalGame lg;
    lg.owner = 0;
    for (int i = 0; i < 13; ++i) lg.members.push_back(i);
    lg.value = [](CoalitionMask) { return 0.0; };
    CHECK_THROWS_AS(shapley_factorized({lg}), SizeError);
}

TEST_CASE("counterfactual game wiring") {
    // reward = -sum |u_i| with chosen u = (2, 1): v(S) flips members of S on
    auto eval = [](const std::vector<bool>& on) {
        double r = 0.0;
        if (on[0]) r -= 2.0;
        if (on[1]) r -= 1.0;
        return r;
    };
    CoalitionGame g = make_counterfactual_game(2, eval);
    CHECK(g.value(0b11) == doctest::Approx(-3.0));  // the realized step
    CHECK(g.value(0b00) == doctest::Approx(0.0));   // all-baseline
    CHECK(g.value(0b01) - g.value(0b00) == doctest::Approx(-2.0));
    CHECK_THROWS_AS(make_counterfactual_game(2, nullptr), CounterfactualUnavailableError);
}
