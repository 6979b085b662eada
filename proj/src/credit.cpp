#include "marlcc/credit.hpp"

#include <bit>
#include <cmath>
#include <iostream>
#include <numeric>

#include "marlcc/error.hpp"

namespace marlcc::credit {

CoalitionGame::CoalitionGame(int n_players, std::function<double(CoalitionMask)> value)
    : n_(n_players), oracle_(std::move(value)) {
    if (n_ < 1 || n_ > 31) throw SizeError("CoalitionGame supports 1..31 players");
    if (n_ <= kExactHardCap) {
        cache_.assign(std::size_t{1} << n_, 0.0);
        cached_.assign(std::size_t{1} << n_, 0);
    }
}

double CoalitionGame::value(CoalitionMask mask) const {
    if (!cache_.empty()) {
        if (cached_[mask]) return cache_[mask];
        const double v = oracle_(mask);
        ++calls_;
        cache_[mask] = v;
        cached_[mask] = 1;
        return v;
    }
    ++calls_;
    return oracle_(mask);
}

std::string method_name(AllocationMethod m) {
    switch (m) {
        case AllocationMethod::Exact: return "exact";
        case AllocationMethod::MonteCarlo: return "monte-carlo";
        case AllocationMethod::Factorized: return "factorized";
        case AllocationMethod::Uniform: return "uniform";
    }
    return "unknown";
}

ShapleyAllocation shapley_exact(const CoalitionGame& game) {
    const int n = game.n_players();
    if (n > kExactHardCap) {
        throw SizeError("exact Shapley is capped at " + std::to_string(kExactHardCap) +
                        " players (2^N oracle calls); use the Monte-Carlo method instead");
    }
    if (n > kExactWarnAbove) {
        std::cerr << "warning: exact Shapley with " << n << " players needs " << (1u << n)
                  << " coalition evaluations\n";
    }
    // w[s] = s! (N-s-1)! / N! built by recurrence to avoid factorial overflow.
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    w[0] = 1.0 / n;
    for (int s = 1; s < n; ++s) w[s] = w[s - 1] * s / static_cast<double>(n - s);

    ShapleyAllocation out;
    out.method = AllocationMethod::Exact;
    out.phi.assign(n, 0.0);
    out.standard_errors.assign(n, 0.0);
    const CoalitionMask full = game.grand_coalition();
    for (CoalitionMask s = 0; s <= full; ++s) {
        const int size = std::popcount(s);
        for (int i = 0; i < n; ++i) {
            const CoalitionMask bit = CoalitionMask{1} << i;
            if (s & bit) continue;
            out.phi[i] += w[size] * (game.value(s | bit) - game.value(s));
        }
    }
    out.oracle_calls = game.oracle_calls();
    return out;
}

ShapleyAllocation shapley_mc(const CoalitionGame& game, int permutations, Rng& rng) {
    if (permutations < 1) throw SizeError("shapley_mc requires at least one permutation");
    const int n = game.n_players();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    for (int m = 0; m < permutations; ++m) {
        rng.shuffle(order);
        CoalitionMask prefix = 0;
        double prev = game.value(prefix);
        for (int pos = 0; pos < n; ++pos) {
            prefix |= CoalitionMask{1} << order[pos];
            const double cur = game.value(prefix);
            const double marginal = cur - prev;
            sum[order[pos]] += marginal;
            sumsq[order[pos]] += marginal * marginal;
            prev = cur;
        }
    }
    ShapleyAllocation out;
    out.method = AllocationMethod::MonteCarlo;
    out.mc_samples = permutations;
    out.phi.resize(n);
    out.standard_errors.resize(n);
    for (int i = 0; i < n; ++i) {
        const double mean = sum[i] / permutations;
        out.phi[i] = mean;
        if (permutations > 1) {
            const double var =
                std::max(0.0, (sumsq[i] - permutations * mean * mean) / (permutations - 1));
            out.standard_errors[i] = std::sqrt(var / permutations);
        } else {
            out.standard_errors[i] = 0.0;
        }
    }
    out.oracle_calls = game.oracle_calls();
    return out;
}

ShapleyAllocation shapley_factorized(const std::vector<LocalGame>& local_games) {
    ShapleyAllocation out;
    out.method = AllocationMethod::Factorized;
    out.phi.reserve(local_games.size());
    out.standard_errors.assign(local_games.size(), 0.0);
    long calls = 0;
    for (const auto& lg : local_games) {
        const int k = static_cast<int>(lg.members.size());
        if (k > kFactorizedCap) {
            throw SizeError("factorized Shapley neighborhood has " + std::to_string(k) +
                            " players; the cap is " + std::to_string(kFactorizedCap));
        }
        int owner_pos = -1;
        for (int p = 0; p < k; ++p) {
            if (lg.members[p] == lg.owner) owner_pos = p;
        }
        if (owner_pos < 0) throw SizeError("factorized Shapley: owner missing from its members");
        CoalitionGame local(k, lg.value);
        const ShapleyAllocation alloc = shapley_exact(local);
        out.phi.push_back(alloc.phi[owner_pos]);
        calls += alloc.oracle_calls;
    }
    out.oracle_calls = calls;
    return out;
}

CoalitionGame make_counterfactual_game(
    int n_agents, std::function<double(const std::vector<bool>& use_chosen)> evaluate) {
    if (!evaluate) {
        throw CounterfactualUnavailableError(
            "no snapshot evaluator available for counterfactual values");
    }
    return CoalitionGame(n_agents, [n_agents, eval = std::move(evaluate)](CoalitionMask mask) {
        std::vector<bool> chosen(n_agents, false);
        for (int i = 0; i < n_agents; ++i) chosen[i] = (mask >> i) & 1u;
        return eval(chosen);
    });
}

}  // namespace marlcc::credit
