#include "hyperquery/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hyperquery {

std::size_t rank_of_true(std::span<const double> scores, std::size_t true_id) {
    if (true_id >= scores.size()) {
        throw std::out_of_range("true id " + std::to_string(true_id) + " outside " + std::to_string(scores.size()) +
                                " scores");
    }
    const double target = scores[true_id];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j == true_id) continue;
        if (scores[j] >= target) ++rank;
    }
    return rank;
}

double mrr(std::span<const std::size_t> ranks) {
    if (ranks.empty()) throw std::invalid_argument("mrr of zero queries");
    double sum = 0.0;
    for (std::size_t r : ranks) {
        if (r == 0) throw std::invalid_argument("ranks are 1-based");
        sum += 1.0 / static_cast<double>(r);
    }
    return sum / static_cast<double>(ranks.size());
}

double hit_at(std::span<const std::size_t> ranks, std::size_t cutoff) {
    if (ranks.empty()) throw std::invalid_argument("hit@k of zero queries");
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= cutoff; });
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty()) throw std::invalid_argument("auc needs both classes");
    // Sort negatives once; each positive then counts wins and ties by binary search.
    std::vector<double> neg(neg_scores.begin(), neg_scores.end());
    std::sort(neg.begin(), neg.end());
    double wins = 0.0;
    for (double p : pos_scores) {
        auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        auto hi = std::upper_bound(lo, neg.end(), p);
        wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(pos_scores.size()) * static_cast<double>(neg.size()));
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw std::invalid_argument("accuracy needs equal-length nonempty inputs");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace hyperquery
