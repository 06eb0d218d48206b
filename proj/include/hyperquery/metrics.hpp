// metrics.hpp - ranking and classification metrics, all in [0, 1]
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hyperquery {

struct RankResult {
    std::vector<std::size_t> ranks;  // 1-based rank of the true item per query

    std::size_t query_count() const { return ranks.size(); }
};

// 1 + #(scores strictly above the true score) + #(other scores equal to it).
// Ties count against the true item.
std::size_t rank_of_true(std::span<const double> scores, std::size_t true_id);

double mrr(std::span<const std::size_t> ranks);
double hit_at(std::span<const std::size_t> ranks, std::size_t cutoff);

// Mann-Whitney estimate of P(pos > neg), ties count one half.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

}  // namespace hyperquery
