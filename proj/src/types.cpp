#include "halluscore/types.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "halluscore/utf8.hpp"

namespace halluscore {

namespace {

constexpr std::array<std::string_view, 3> kNliNames = {"entail", "contradict", "neutral"};
constexpr std::array<std::string_view, 2> kLabelNames = {"supported", "hallucinated"};
constexpr std::array<std::string_view, 5> kMethodNames = {"likelihood", "entropy", "ccp",
                                                          "sar", "focus"};
constexpr std::array<std::string_view, kPosTagCount> kPosNames = {
    "ADJ",  "ADP",  "ADV",   "AUX",   "CCONJ", "DET",   "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM",   "VERB", "X",    "SPACE"};
constexpr std::array<std::string_view, kNerTagCount> kNerNames = {
    "PERSON",   "NORP",     "FAC",  "ORG",  "GPE",     "LOC",   "PRODUCT", "EVENT",   "WORK_OF_ART",
    "LAW",      "LANGUAGE", "DATE", "TIME", "PERCENT", "MONEY", "QUANTITY", "ORDINAL", "CARDINAL"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
    const auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) return std::nullopt;
    return static_cast<Enum>(it - names.begin());
}

bool nonpositive(double x) { return x <= 0.0; }
bool nonnegative(double x) { return x >= 0.0 && std::isfinite(x); }

}  // namespace

std::string_view to_string(NliRelation r) { return kNliNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Label l) { return kLabelNames[static_cast<std::size_t>(l)]; }
std::string_view to_string(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(PosTag t) { return kPosNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(NerTag t) { return kNerNames[static_cast<std::size_t>(t)]; }

std::optional<NliRelation> parse_nli_relation(std::string_view s) {
    return lookup<NliRelation>(kNliNames, s);
}
std::optional<Label> parse_label(std::string_view s) { return lookup<Label>(kLabelNames, s); }
std::optional<Method> parse_method(std::string_view s) { return lookup<Method>(kMethodNames, s); }
std::optional<PosTag> parse_pos_tag(std::string_view s) { return lookup<PosTag>(kPosNames, s); }
std::optional<NerTag> parse_ner_tag(std::string_view s) { return lookup<NerTag>(kNerNames, s); }

std::size_t AnnotatedDocument::hallucinated_count() const {
    return static_cast<std::size_t>(std::count_if(
        entities.begin(), entities.end(),
        [](const Entity& e) { return e.label == Label::hallucinated; }));
}

std::vector<std::string> validate_trace(const GenerationTrace& trace,
                                        std::size_t max_alternatives) {
    std::vector<std::string> out;

    std::size_t bad_byte = 0;
    const auto index = utf8::ScalarIndex::build(trace.generated_text, &bad_byte);
    if (!index) {
        out.push_back(fmt::format("generated_text: invalid UTF-8 at byte {}", bad_byte));
    }
    if (trace.doc_id.empty()) out.emplace_back("doc_id: must not be empty");

    const std::size_t text_len = index ? index->length() : 0;
    for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
        const TokenRecord& t = trace.tokens[i];
        if (t.char_start >= t.char_end) {
            out.push_back(fmt::format("token {}: char_start must be < char_end", i));
        }
        if (index && t.char_end > text_len) {
            out.push_back(fmt::format("token {}: span [{}, {}) exceeds text length {}", i,
                                      t.char_start, t.char_end, text_len));
        }
        if (i > 0 && t.char_start < trace.tokens[i - 1].char_end) {
            out.push_back(fmt::format("token {}: span overlaps or precedes token {}", i, i - 1));
        }
        if (!nonpositive(t.logprob)) {
            out.push_back(fmt::format("token {}: logprob must be ≤ 0", i));
        }
        if (!nonpositive(t.adjusted_logprob)) {
            out.push_back(fmt::format("token {}: adjusted_logprob must be ≤ 0", i));
        }
        if (!nonnegative(t.entropy_nats)) {
            out.push_back(fmt::format("token {}: entropy_nats must be ≥ 0", i));
        }
        if (!nonnegative(t.adjusted_entropy_bits)) {
            out.push_back(fmt::format("token {}: adjusted_entropy_bits must be ≥ 0", i));
        }
        if (!(t.relevance_weight >= 0.0 && t.relevance_weight <= 1.0)) {
            out.push_back(fmt::format("token {}: relevance_weight must lie in [0, 1]", i));
        }

        std::size_t realized = 0;
        for (std::size_t k = 0; k < t.alternatives.size(); ++k) {
            const Alternative& a = t.alternatives[k];
            if (a.is_realized) ++realized;
            if (!nonpositive(a.logprob)) {
                out.push_back(fmt::format("token {}: alternative {} logprob must be ≤ 0", i, k));
            }
        }
        if (t.alternatives.size() - realized > max_alternatives) {
            out.push_back(fmt::format("token {}: {} alternatives exceed top-k limit {}", i,
                                      t.alternatives.size() - realized, max_alternatives));
        }
        if (realized > 1) {
            out.push_back(fmt::format("token {}: {} alternatives flagged as realized", i, realized));
        }
        if (!t.alternatives.empty() && realized == 0) {
            out.push_back(fmt::format("token {}: realized token missing from alternatives", i));
        }
    }

    if (trace.attention) {
        const AttentionRows& att = *trace.attention;
        if (att.size() != trace.tokens.size()) {
            out.push_back(fmt::format("attention: expected {} rows, found {}",
                                      trace.tokens.size(), att.size()));
        }
        for (std::size_t i = 0; i < att.size(); ++i) {
            if (att[i].size() != i) {
                out.push_back(fmt::format("attention row {}: expected {} entries", i, i));
            }
            for (std::size_t j = 0; j < att[i].size(); ++j) {
                if (!(att[i][j] >= 0.0f) || !std::isfinite(att[i][j])) {
                    out.push_back(fmt::format("attention row {}: entry {} must be finite and ≥ 0",
                                              i, j));
                    break;
                }
            }
        }
    }
    return out;
}

std::vector<std::string> validate_document(const AnnotatedDocument& doc) {
    std::vector<std::string> out;
    if (doc.doc_id.empty()) out.emplace_back("doc_id: must not be empty");
    if (doc.entities.empty()) out.emplace_back("entities: at least one entity required");

    std::size_t bad_byte = 0;
    const auto index = utf8::ScalarIndex::build(doc.generated_text, &bad_byte);
    if (!index) {
        out.push_back(fmt::format("text: invalid UTF-8 at byte {}", bad_byte));
        return out;
    }
    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        const Entity& e = doc.entities[k];
        if (e.char_start >= e.char_end) {
            out.push_back(fmt::format("entity {}: start must be < end", k));
            continue;
        }
        if (e.char_end > index->length()) {
            out.push_back(fmt::format("entity {}: span [{}, {}) outside text of length {}", k,
                                      e.char_start, e.char_end, index->length()));
            continue;
        }
        if (k > 0 && e.char_start < doc.entities[k - 1].char_end) {
            out.push_back(fmt::format("entity {}: span overlaps or precedes entity {}", k, k - 1));
        }
        const auto slice = index->slice(doc.generated_text, e.char_start, e.char_end);
        if (slice != e.surface) {
            out.push_back(fmt::format("entity {}: surface \"{}\" does not match text \"{}\"", k,
                                      e.surface, slice));
        }
    }
    return out;
}

}  // namespace halluscore
