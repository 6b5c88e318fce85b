#include "halluscore/alignment.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "halluscore/error.hpp"
#include "halluscore/utf8.hpp"

namespace halluscore {

AlignmentResult align(const AnnotatedDocument& doc, const GenerationTrace& trace) {
    if (doc.generated_text != trace.generated_text) {
        const auto offset = utf8::first_difference(doc.generated_text, trace.generated_text);
        throw AlignmentError(fmt::format(
            "document '{}': dataset text and trace text differ at offset {}", doc.doc_id,
            offset.value_or(0)));
    }
    const auto text_len = utf8::scalar_length(doc.generated_text);
    if (!text_len) {
        throw AlignmentError(fmt::format("document '{}': text is not valid UTF-8", doc.doc_id));
    }

    const auto& tokens = trace.tokens;
    AlignmentResult result;
    result.ranges.reserve(doc.entities.size());

    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        const Entity& e = doc.entities[k];
        if (e.char_end > *text_len || e.char_start >= e.char_end) {
            throw AlignmentError(fmt::format(
                "document '{}': entity {} span [{}, {}) is outside text of length {}",
                doc.doc_id, e.entity_id, e.char_start, e.char_end, *text_len));
        }

        // Token ends ascend, so the first overlapping token is the first whose
        // end lies past the entity start.
        const auto first = std::partition_point(
            tokens.begin(), tokens.end(),
            [&](const TokenRecord& t) { return t.char_end <= e.char_start; });
        auto last = first;
        while (last != tokens.end() && last->char_start < e.char_end) ++last;

        if (first == last) {
            throw AlignmentError(fmt::format("document '{}': entity {} overlaps no token",
                                             doc.doc_id, e.entity_id));
        }

        const auto begin_idx = static_cast<std::size_t>(first - tokens.begin());
        const auto end_idx = static_cast<std::size_t>(last - tokens.begin()) - 1;
        result.ranges.push_back({begin_idx, end_idx});

        const bool partial_start = first->char_start < e.char_start;
        const bool partial_end = tokens[end_idx].char_end > e.char_end;
        if (partial_start || partial_end) {
            std::string where = partial_start && partial_end ? "both boundary tokens"
                                : partial_start            ? fmt::format("token {}", begin_idx)
                                                           : fmt::format("token {}", end_idx);
            result.warnings.push_back(
                {k, e.entity_id,
                 fmt::format("entity {} '{}' partially overlaps {}", e.entity_id, e.surface,
                             where)});
        }
    }
    return result;
}

}  // namespace halluscore
