#pragma once

// Threshold-free and threshold-optimal detection metrics over pooled entity
// scores. Labels are 1 for hallucinated and 0 for supported; a score at or
// above a threshold predicts "hallucinated".

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Throws MetricError unless both classes are present.
double auroc(std::span<const int> labels, std::span<const double> scores);

/// Average precision: sum over distinct thresholds (descending) of the
/// recall increment times the precision at that threshold. Equal scores form
/// a single step. Throws MetricError when there are no positives.
double auprc(std::span<const int> labels, std::span<const double> scores);

struct OperatingPoint {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    /// +infinity for the predict-nothing operating point.
    double threshold = 0.0;
};

/// Best F1 over every distinct score used as a threshold, plus the
/// predict-nothing threshold. Ties go to higher precision, then to the higher
/// threshold. Throws MetricError when there are no positives.
OperatingPoint f1_sweep(std::span<const int> labels, std::span<const double> scores);

/// Product-moment correlation. Throws MetricError for length mismatch, fewer
/// than two pairs, or a constant input.
double pearson(std::span<const double> a, std::span<const double> b);

enum class RateGroup { low, medium, high };

inline constexpr std::array<RateGroup, 3> kAllRateGroups = {RateGroup::low, RateGroup::medium,
                                                            RateGroup::high};

std::string_view to_string(RateGroup g);

/// low: rate < 10%; medium: 10% <= rate <= 20%; high: rate > 20%.
/// Evaluated exactly on the integer counts.
RateGroup rate_group(std::size_t hallucinated, std::size_t total);

std::map<RateGroup, std::vector<std::string>> group_by_rate(
    std::span<const AnnotatedDocument> dataset);

/// Per-document hallucination rates binned in 5-point steps: bin b counts
/// documents with 5b% <= rate < 5(b+1)%, the last bin closed at 100%.
std::array<std::size_t, 20> rate_histogram(std::span<const AnnotatedDocument> dataset);

struct MetricSet {
    double auroc = 0.0;
    double auprc = 0.0;
    OperatingPoint optimum;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
};

/// All metrics at once. Throws MetricError if either class is missing.
MetricSet compute_metrics(std::span<const int> labels, std::span<const double> scores);

struct EvaluationReport {
    Method method = Method::likelihood;
    MetricSet overall;
    /// Filled only when evaluated by rate group. A group whose entities lack
    /// one of the two classes maps to std::nullopt.
    std::map<RateGroup, std::optional<MetricSet>> per_group;
    std::map<RateGroup, std::size_t> group_documents;
    std::vector<std::string> warnings;
};

/// Pools every entity of every document (micro averaging) and evaluates.
/// `scores` must hold exactly one EntityScores per dataset document, in any
/// order; mismatched doc_ids or entity counts throw InputMismatchError.
EvaluationReport evaluate(Method method, std::span<const AnnotatedDocument> dataset,
                          std::span<const EntityScores> scores, bool by_rate);

}  // namespace halluscore
