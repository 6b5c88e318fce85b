#pragma once

// Domain types shared by every module: per-token generation evidence, the
// annotated documents it is scored against, and the score vectors produced
// along the way.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halluscore {

enum class NliRelation { entail, contradict, neutral };

enum class Label { supported, hallucinated };

enum class Method { likelihood, entropy, ccp, sar, focus };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::likelihood, Method::entropy, Method::ccp, Method::sar, Method::focus};

/// Universal POS tags (the spaCy coarse tag set).
enum class PosTag {
    ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART,
    PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X, SPACE,
};

/// OntoNotes named-entity types. Tokens outside any named entity carry
/// std::nullopt instead.
enum class NerTag {
    PERSON, NORP, FAC, ORG, GPE, LOC, PRODUCT, EVENT, WORK_OF_ART, LAW,
    LANGUAGE, DATE, TIME, PERCENT, MONEY, QUANTITY, ORDINAL, CARDINAL,
};

inline constexpr std::size_t kPosTagCount = 18;
inline constexpr std::size_t kNerTagCount = 18;

std::string_view to_string(NliRelation r);
std::string_view to_string(Label l);
std::string_view to_string(Method m);
std::string_view to_string(PosTag t);
std::string_view to_string(NerTag t);

std::optional<NliRelation> parse_nli_relation(std::string_view s);
std::optional<Label> parse_label(std::string_view s);
std::optional<Method> parse_method(std::string_view s);
std::optional<PosTag> parse_pos_tag(std::string_view s);
std::optional<NerTag> parse_ner_tag(std::string_view s);

/// One of the top-k next-token candidates at a position.
struct Alternative {
    std::string surface;
    double logprob = 0.0;
    NliRelation nli_relation = NliRelation::neutral;
    bool is_realized = false;

    bool operator==(const Alternative&) const = default;
};

/// Everything the scorers need to know about one generated token. Offsets are
/// half-open and counted in Unicode scalar values.
struct TokenRecord {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    double logprob = 0.0;
    double entropy_nats = 0.0;
    std::vector<Alternative> alternatives;
    double relevance_weight = 0.0;
    double adjusted_logprob = 0.0;
    double adjusted_entropy_bits = 0.0;
    bool is_keyword = false;
    PosTag pos_tag = PosTag::X;
    std::optional<NerTag> ner_tag;
    std::size_t sentence_index = 0;
    std::size_t word_index_in_sentence = 0;

    bool operator==(const TokenRecord&) const = default;
};

/// Lower-triangular attention: row i holds the weights of token i over
/// tokens 0..i-1, already max-pooled over layers and heads.
using AttentionRows = std::vector<std::vector<float>>;

struct GenerationTrace {
    std::string doc_id;
    std::string generated_text;
    std::vector<TokenRecord> tokens;
    std::optional<AttentionRows> attention;
    /// Extractor metadata as a compact JSON object; empty when absent.
    std::string metadata_json;

    bool operator==(const GenerationTrace&) const = default;
};

struct Entity {
    int entity_id = 0;
    std::string surface;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    Label label = Label::supported;

    bool operator==(const Entity&) const = default;
};

struct AnnotatedDocument {
    std::string doc_id;
    std::string name;
    std::string generated_text;
    std::vector<Entity> entities;

    std::size_t hallucinated_count() const;

    bool operator==(const AnnotatedDocument&) const = default;
};

/// Inclusive token index range [first, last].
struct TokenRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last - first + 1; }
    bool operator==(const TokenRange&) const = default;
};

struct TokenScores {
    std::string doc_id;
    Method method = Method::likelihood;
    std::vector<double> values;

    bool operator==(const TokenScores&) const = default;
};

struct EntityScores {
    std::string doc_id;
    Method method = Method::likelihood;
    std::vector<double> values;
    std::vector<TokenRange> token_ranges;

    bool operator==(const EntityScores&) const = default;
};

/// Checks every GenerationTrace invariant and returns one human-readable line
/// per violation. Never throws on any parsed input.
///
/// `max_alternatives` bounds the number of non-realized alternatives per token
/// (the realized token may be appended on top of the top-k list).
std::vector<std::string> validate_trace(const GenerationTrace& trace,
                                        std::size_t max_alternatives = 10);

/// Same contract for an annotated document: spans sorted, non-overlapping,
/// inside the text and matching their surfaces; at least one entity.
std::vector<std::string> validate_document(const AnnotatedDocument& doc);

}  // namespace halluscore
