#pragma once

// Error analysis of entity-level detection: false positive/negative rates
// broken down by POS tag, NER tag and sentence position, hallucination base
// rates per tag, and color-coded rendering of scored documents.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halluscore/alignment.hpp"
#include "halluscore/types.hpp"

namespace halluscore {

enum class PositionClass { first, middle, last };

inline constexpr std::array<PositionClass, 3> kAllPositionClasses = {
    PositionClass::first, PositionClass::middle, PositionClass::last};

/// Width of the first and last windows, in words.
inline constexpr std::size_t kPositionWindow = 6;

/// Key used for words outside any named entity in NER tables.
inline constexpr std::string_view kNoNerTag = "NONE";

std::string_view to_string(PositionClass p);

/// first if the word is among the first six of its sentence, last if among
/// the final six (and not first), middle otherwise. Short sentences resolve
/// to first.
PositionClass position_class(std::size_t word_index, std::size_t sentence_word_count);
PositionClass position_class(const TokenRecord& token, std::size_t sentence_word_count);

/// Whitespace-word count of every sentence, indexed by sentence_index and
/// derived from the largest word index seen in each sentence.
std::vector<std::size_t> sentence_word_counts(const GenerationTrace& trace);

struct ConfusionCell {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    /// FP / (FP + TN); std::nullopt without supported incidences.
    std::optional<double> fpr() const;
    /// FN / (FN + TP); std::nullopt without hallucinated incidences.
    std::optional<double> fnr() const;

    ConfusionCell& operator+=(const ConfusionCell& other);
    bool operator==(const ConfusionCell&) const = default;
};

using ConfusionTable = std::map<std::string, ConfusionCell>;

/// Linguistic attributes of one scored entity.
struct EntityObservation {
    double score = 0.0;
    Label label = Label::supported;
    /// Distinct tags over the entity's tokens, sorted.
    std::vector<PosTag> pos_tags;
    /// Distinct NER tags; std::nullopt stands for "not a named entity".
    std::vector<std::optional<NerTag>> ner_tags;
    /// Position class of the entity's first word.
    PositionClass position = PositionClass::first;
};

std::vector<EntityObservation> observe_entities(const AnnotatedDocument& doc,
                                                const GenerationTrace& trace,
                                                const AlignmentResult& alignment,
                                                const EntityScores& scores);

struct ErrorBreakdown {
    double threshold = 0.0;
    ConfusionTable pos;
    ConfusionTable ner;
    ConfusionTable position;

    ErrorBreakdown& operator+=(const ErrorBreakdown& other);
};

/// Classifies every entity at `threshold` (score >= threshold predicts
/// hallucinated) and attributes it to each of its distinct POS and NER tags
/// and to the position class of its first word.
ErrorBreakdown error_breakdown(std::span<const EntityObservation> entities, double threshold);

struct TagCount {
    std::size_t words = 0;
    std::size_t hallucinated = 0;

    TagCount& operator+=(const TagCount& other);
    bool operator==(const TagCount&) const = default;
};

/// Word-level tag frequencies and hallucination rates. Each whitespace word
/// inside an entity counts once per entity and inherits the entity's label;
/// its tags come from its first token.
struct TagStats {
    std::size_t total_words = 0;
    std::map<std::string, TagCount> pos;
    std::map<std::string, TagCount> ner;
    std::map<std::string, TagCount> position;

    TagStats& operator+=(const TagStats& other);

    static double share(const TagCount& c, std::size_t total);
    static double rate(const TagCount& c);
};

TagStats tag_stats(const AnnotatedDocument& doc, const GenerationTrace& trace,
                   const AlignmentResult& alignment);

struct AnalysisReport {
    Method method = Method::likelihood;
    double threshold = 0.0;
    ErrorBreakdown errors;
    TagStats base_rates;
    std::array<std::size_t, 20> rate_histogram{};
    std::string word_weighting = "per-word";
};

/// Self-contained HTML fragment for one document. Each entity is tinted by
/// its score min-max normalized within the document (a degenerate range maps
/// to 0); ground-truth hallucinations get a red outline.
std::string render_sample_html(const AnnotatedDocument& doc, const EntityScores& scores);

/// Static grouped bar chart of FPR and FNR, one group per key of `order`
/// present in the table.
std::string render_breakdown_svg(std::string_view title, const ConfusionTable& table,
                                 std::span<const std::string> order);

/// Canonical display order of table keys: enum order for tags (NER tables
/// start with the no-entity key) and first, middle, last for positions.
const std::vector<std::string>& pos_keys();
const std::vector<std::string>& ner_keys();
const std::vector<std::string>& position_keys();

}  // namespace halluscore
