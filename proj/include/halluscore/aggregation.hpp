#pragma once

#include "halluscore/alignment.hpp"
#include "halluscore/types.hpp"

namespace halluscore {

/// Entity score = arithmetic mean of the token scores over the entity's
/// inclusive token range. Throws AggregationError naming the entity index if
/// a range falls outside the token scores.
EntityScores aggregate(const TokenScores& token_scores, const AlignmentResult& alignment);

}  // namespace halluscore
