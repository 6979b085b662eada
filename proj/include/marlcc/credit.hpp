#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "marlcc/rng.hpp"

namespace marlcc::credit {

/// Coalition mask: bit i set means player i is in the coalition.
using CoalitionMask = std::uint32_t;

/// Cooperative game with a memoizing value oracle. Each distinct subset is
/// evaluated at most once; `oracle_calls()` counts underlying evaluations.
class CoalitionGame {
public:
    CoalitionGame(int n_players, std::function<double(CoalitionMask)> value);

    int n_players() const { return n_; }
    double value(CoalitionMask mask) const;
    long oracle_calls() const { return calls_; }
    CoalitionMask grand_coalition() const { return (CoalitionMask{1} << n_) - 1; }

private:
    int n_;
    std::function<double(CoalitionMask)> oracle_;
    mutable std::vector<double> cache_;
    mutable std::vector<char> cached_;
    mutable long calls_ = 0;
};

enum class AllocationMethod { Exact, MonteCarlo, Factorized, Uniform };

struct ShapleyAllocation {
    std::vector<double> phi;
    AllocationMethod method = AllocationMethod::Exact;
    int mc_samples = 0;                   // M for the Monte-Carlo method
    std::vector<double> standard_errors;  // zero for exact
    long oracle_calls = 0;
};

std::string method_name(AllocationMethod m);

inline constexpr int kExactHardCap = 20;
inline constexpr int kExactWarnAbove = 12;
inline constexpr int kFactorizedCap = 12;

/// Exact Shapley value by subset enumeration,
/// phi_i = sum_S |S|!(N-|S|-1)!/N! [v(S ∪ {i}) - v(S)].
/// Throws SizeError above the hard cap and suggests the Monte-Carlo path.
ShapleyAllocation shapley_exact(const CoalitionGame& game);

/// Monte-Carlo permutation estimator: every permutation contributes one
/// marginal sample per player. Returns per-player mean and standard error.
ShapleyAllocation shapley_mc(const CoalitionGame& game, int permutations, Rng& rng);

/// A player's local game: the member list (which must contain the owner)
/// and a value oracle over subsets of those members (bit k of the local
/// mask refers to members[k]).
struct LocalGame {
    int owner = 0;
    std::vector<int> members;
    std::function<double(CoalitionMask)> value;
};

/// Neighborhood-factorized allocation: each player's phi is its exact
/// Shapley value inside its own local game. No global efficiency guarantee.
ShapleyAllocation shapley_factorized(const std::vector<LocalGame>& local_games);

/// Builds the counterfactual coalition value used for per-step credit:
/// v(S) = one-step global reward when agents in S apply their chosen
/// actions and all others apply the baseline action. `evaluate` must
/// re-step a frozen snapshot deterministically. Throws
/// CounterfactualUnavailableError when `evaluate` is empty.
CoalitionGame make_counterfactual_game(
    int n_agents, std::function<double(const std::vector<bool>& use_chosen)> evaluate);

}  // namespace marlcc::credit
