#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

struct AlignmentWarning {
    std::size_t entity_index = 0;
    int entity_id = 0;
    std::string message;

    bool operator==(const AlignmentWarning&) const = default;
};

struct AlignmentResult {
    /// One inclusive token range per entity, in entity order.
    std::vector<TokenRange> ranges;
    /// Entities whose boundary tokens stick out past the entity span.
    std::vector<AlignmentWarning> warnings;
};

/// Maps each entity onto the minimal token range covering every token that
/// overlaps the entity span by at least one scalar value.
///
/// Throws AlignmentError when the texts differ (naming the first differing
/// offset), when an entity extends past the end of the text, or when an
/// entity overlaps no token. Tokens must be sorted and non-overlapping.
AlignmentResult align(const AnnotatedDocument& doc, const GenerationTrace& trace);

}  // namespace halluscore
