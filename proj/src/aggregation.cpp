#include "halluscore/aggregation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "halluscore/error.hpp"

namespace halluscore {

EntityScores aggregate(const TokenScores& token_scores, const AlignmentResult& alignment) {
    EntityScores out;
    out.doc_id = token_scores.doc_id;
    out.method = token_scores.method;
    out.values.reserve(alignment.ranges.size());
    out.token_ranges = alignment.ranges;

    const auto& values = token_scores.values;
    for (std::size_t k = 0; k < alignment.ranges.size(); ++k) {
        const TokenRange r = alignment.ranges[k];
        if (r.first > r.last || r.last >= values.size()) {
            throw AggregationError(fmt::format(
                "document '{}': entity {} token range [{}, {}] is outside {} token scores",
                token_scores.doc_id, k, r.first, r.last, values.size()));
        }
        double sum = 0.0;
        double lo = values[r.first];
        double hi = values[r.first];
        for (std::size_t i = r.first; i <= r.last; ++i) {
            sum += values[i];
            lo = std::min(lo, values[i]);
            hi = std::max(hi, values[i]);
        }
        // Rounding in the sum can push the mean a ulp outside the range.
        out.values.push_back(std::clamp(sum / static_cast<double>(r.size()), lo, hi));
    }
    return out;
}

}  // namespace halluscore
