#include "halluscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "halluscore/error.hpp"

namespace halluscore {

namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

ClassCounts check_inputs(std::span<const int> labels, std::span<const double> scores,
                         std::string_view metric) {
    if (labels.size() != scores.size()) {
        throw MetricError(fmt::format("{}: {} labels but {} scores", metric, labels.size(),
                                      scores.size()));
    }
    ClassCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++c.positives;
        } else if (labels[i] == 0) {
            ++c.negatives;
        } else {
            throw MetricError(fmt::format("{}: label {} at index {} is not 0 or 1", metric,
                                          labels[i], i));
        }
        if (!std::isfinite(scores[i])) {
            throw MetricError(fmt::format("{}: score at index {} is not finite", metric, i));
        }
    }
    return c;
}

// Distinct score values in descending order, each with the number of positives
// and negatives sharing it.
struct ScoreGroup {
    double score;
    std::size_t positives;
    std::size_t negatives;
};

std::vector<ScoreGroup> descending_groups(std::span<const int> labels,
                                          std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<ScoreGroup> groups;
    for (std::size_t idx : order) {
        if (groups.empty() || groups.back().score != scores[idx]) {
            groups.push_back({scores[idx], 0, 0});
        }
        if (labels[idx] == 1) {
            ++groups.back().positives;
        } else {
            ++groups.back().negatives;
        }
    }
    return groups;
}

__extension__ using u128 = unsigned __int128;

// a/b > c/d for non-negative integers with positive denominators.
bool ratio_greater(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return static_cast<u128>(a) * d > static_cast<u128>(c) * b;
}
bool ratio_equal(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return static_cast<u128>(a) * d == static_cast<u128>(c) * b;
}

}  // namespace

double auroc(std::span<const int> labels, std::span<const double> scores) {
    const auto counts = check_inputs(labels, scores, "AUROC");
    if (counts.positives == 0 || counts.negatives == 0) {
        throw MetricError("undefined AUROC: both classes must be present");
    }
    // Walk groups from the lowest score up; doubled counts keep ties exact.
    auto groups = descending_groups(labels, scores);
    std::uint64_t negatives_below = 0;
    std::uint64_t doubled_wins = 0;
    for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
        doubled_wins += 2 * it->positives * negatives_below + it->positives * it->negatives;
        negatives_below += it->negatives;
    }
    const double pairs = static_cast<double>(counts.positives) * static_cast<double>(counts.negatives);
    return static_cast<double>(doubled_wins) / (2.0 * pairs);
}

double auprc(std::span<const int> labels, std::span<const double> scores) {
    const auto counts = check_inputs(labels, scores, "AUPRC");
    if (counts.positives == 0) throw MetricError("undefined AUPRC: no positive labels");

    const auto total_pos = static_cast<double>(counts.positives);
    std::size_t tp = 0;
    std::size_t fp = 0;
    double ap = 0.0;
    for (const auto& g : descending_groups(labels, scores)) {
        tp += g.positives;
        fp += g.negatives;
        if (g.positives == 0) continue;
        const double recall_step = static_cast<double>(g.positives) / total_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += recall_step * precision;
    }
    return ap;
}

OperatingPoint f1_sweep(std::span<const int> labels, std::span<const double> scores) {
    const auto counts = check_inputs(labels, scores, "F1 sweep");
    if (counts.positives == 0) throw MetricError("undefined F1 sweep: no positive labels");
    const std::uint64_t positives = counts.positives;

    // Predict-nothing point: F1 = 0 and precision taken as 0.
    OperatingPoint best{0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    std::uint64_t best_tp = 0;
    std::uint64_t best_fp = 0;

    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    // Descending thresholds: a later candidate only wins on a strict
    // improvement, which keeps the higher threshold on full ties.
    for (const auto& g : descending_groups(labels, scores)) {
        tp += g.positives;
        fp += g.negatives;
        // F1 = 2TP / (TP + FP + P); precision = TP / (TP + FP).
        const bool better_f1 = ratio_greater(2 * tp, tp + fp + positives, 2 * best_tp,
                                             best_tp + best_fp + positives);
        const bool same_f1 = ratio_equal(2 * tp, tp + fp + positives, 2 * best_tp,
                                         best_tp + best_fp + positives);
        const bool better_precision =
            best_tp + best_fp == 0 ? tp > 0 : ratio_greater(tp, tp + fp, best_tp, best_tp + best_fp);
        if (better_f1 || (same_f1 && better_precision)) {
            best_tp = tp;
            best_fp = fp;
            best.threshold = g.score;
        }
    }
    if (best_tp > 0) {
        best.precision = static_cast<double>(best_tp) / static_cast<double>(best_tp + best_fp);
        best.recall = static_cast<double>(best_tp) / static_cast<double>(positives);
        best.f1 = static_cast<double>(2 * best_tp) /
                  static_cast<double>(best_tp + best_fp + positives);
    }
    return best;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw MetricError(fmt::format("Pearson: {} vs {} values", a.size(), b.size()));
    }
    if (a.size() < 2) throw MetricError("Pearson: at least two pairs required");
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(a) || constant(b)) throw MetricError("Pearson: undefined for a constant input");
    const auto n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!std::isfinite(sab) || !std::isfinite(saa) || !std::isfinite(sbb)) {
        throw MetricError("Pearson: non-finite input");
    }
    if (saa == 0.0 || sbb == 0.0) throw MetricError("Pearson: undefined for a constant input");
    return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

std::string_view to_string(RateGroup g) {
    switch (g) {
        case RateGroup::low: return "low";
        case RateGroup::medium: return "medium";
        case RateGroup::high: return "high";
    }
    return "unknown";
}

RateGroup rate_group(std::size_t hallucinated, std::size_t total) {
    // rate < 1/10  <=>  10h < n;  rate > 1/5  <=>  5h > n.
    if (10 * hallucinated < total) return RateGroup::low;
    if (5 * hallucinated > total) return RateGroup::high;
    return RateGroup::medium;
}

std::map<RateGroup, std::vector<std::string>> group_by_rate(
    std::span<const AnnotatedDocument> dataset) {
    std::map<RateGroup, std::vector<std::string>> groups;
    for (RateGroup g : kAllRateGroups) groups[g];
    for (const auto& doc : dataset) {
        groups[rate_group(doc.hallucinated_count(), doc.entities.size())].push_back(doc.doc_id);
    }
    return groups;
}

std::array<std::size_t, 20> rate_histogram(std::span<const AnnotatedDocument> dataset) {
    std::array<std::size_t, 20> bins{};
    for (const auto& doc : dataset) {
        if (doc.entities.empty()) continue;
        const std::size_t bin = 20 * doc.hallucinated_count() / doc.entities.size();
        ++bins[std::min<std::size_t>(bin, bins.size() - 1)];
    }
    return bins;
}

MetricSet compute_metrics(std::span<const int> labels, std::span<const double> scores) {
    MetricSet m;
    m.auroc = auroc(labels, scores);
    m.auprc = auprc(labels, scores);
    m.optimum = f1_sweep(labels, scores);
    m.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    m.n_negative = labels.size() - m.n_positive;
    return m;
}

EvaluationReport evaluate(Method method, std::span<const AnnotatedDocument> dataset,
                          std::span<const EntityScores> scores, bool by_rate) {
    std::unordered_map<std::string_view, const EntityScores*> by_doc;
    for (const auto& s : scores) {
        if (!by_doc.emplace(s.doc_id, &s).second) {
            throw InputMismatchError(fmt::format("scores list document '{}' twice", s.doc_id));
        }
    }
    if (by_doc.size() != dataset.size()) {
        throw InputMismatchError(fmt::format("scores cover {} documents but the dataset has {}",
                                             by_doc.size(), dataset.size()));
    }

    std::vector<int> labels;
    std::vector<double> values;
    std::vector<RateGroup> groups;
    EvaluationReport report;
    report.method = method;

    for (const auto& doc : dataset) {
        const auto it = by_doc.find(doc.doc_id);
        if (it == by_doc.end()) {
            throw InputMismatchError(
                fmt::format("no scores for dataset document '{}'", doc.doc_id));
        }
        const EntityScores& s = *it->second;
        if (s.values.size() != doc.entities.size()) {
            throw InputMismatchError(fmt::format(
                "document '{}': {} entity scores for {} entities", doc.doc_id, s.values.size(),
                doc.entities.size()));
        }
        const RateGroup g = rate_group(doc.hallucinated_count(), doc.entities.size());
        ++report.group_documents[g];
        for (std::size_t k = 0; k < doc.entities.size(); ++k) {
            labels.push_back(doc.entities[k].label == Label::hallucinated ? 1 : 0);
            values.push_back(s.values[k]);
            groups.push_back(g);
        }
    }

    report.overall = compute_metrics(labels, values);
    if (!by_rate) {
        report.group_documents.clear();
        return report;
    }

    for (RateGroup g : kAllRateGroups) {
        report.group_documents.try_emplace(g, 0);
        std::vector<int> gl;
        std::vector<double> gv;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (groups[i] != g) continue;
            gl.push_back(labels[i]);
            gv.push_back(values[i]);
        }
        const auto pos = std::count(gl.begin(), gl.end(), 1);
        if (pos == 0 || static_cast<std::size_t>(pos) == gl.size()) {
            report.per_group[g] = std::nullopt;
            report.warnings.push_back(fmt::format(
                "{} group: metrics undefined ({} entities, {} hallucinated)", to_string(g),
                gl.size(), pos));
            continue;
        }
        report.per_group[g] = compute_metrics(gl, gv);
    }
    return report;
}

}  // namespace halluscore
