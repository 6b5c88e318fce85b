#include "halluscore/analysis.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "halluscore/error.hpp"
#include "halluscore/utf8.hpp"

namespace halluscore {

namespace {

std::string ner_key(const std::optional<NerTag>& tag) {
    return tag ? std::string(to_string(*tag)) : std::string(kNoNerTag);
}

std::optional<double> safe_ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void tally(ConfusionCell& cell, bool predicted, bool actual) {
    if (actual) {
        ++(predicted ? cell.tp : cell.fn);
    } else {
        ++(predicted ? cell.fp : cell.tn);
    }
}

template <typename Cell>
void merge_into(std::map<std::string, Cell>& dst, const std::map<std::string, Cell>& src) {
    for (const auto& [key, cell] : src) dst[key] += cell;
}

std::size_t word_count_for(const std::vector<std::size_t>& counts, const TokenRecord& t) {
    return t.sentence_index < counts.size() ? counts[t.sentence_index] : 0;
}

std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(PositionClass p) {
    switch (p) {
        case PositionClass::first: return "first";
        case PositionClass::middle: return "middle";
        case PositionClass::last: return "last";
    }
    return "unknown";
}

PositionClass position_class(std::size_t word_index, std::size_t sentence_word_count) {
    if (word_index < kPositionWindow) return PositionClass::first;
    if (word_index + kPositionWindow >= sentence_word_count) return PositionClass::last;
    return PositionClass::middle;
}

PositionClass position_class(const TokenRecord& token, std::size_t sentence_word_count) {
    return position_class(token.word_index_in_sentence, sentence_word_count);
}

std::vector<std::size_t> sentence_word_counts(const GenerationTrace& trace) {
    std::vector<std::size_t> counts;
    for (const auto& t : trace.tokens) {
        if (t.sentence_index >= counts.size()) counts.resize(t.sentence_index + 1, 0);
        counts[t.sentence_index] = std::max(counts[t.sentence_index], t.word_index_in_sentence + 1);
    }
    return counts;
}

std::optional<double> ConfusionCell::fpr() const { return safe_ratio(fp, fp + tn); }
std::optional<double> ConfusionCell::fnr() const { return safe_ratio(fn, fn + tp); }

ConfusionCell& ConfusionCell::operator+=(const ConfusionCell& other) {
    tp += other.tp;
    fp += other.fp;
    tn += other.tn;
    fn += other.fn;
    return *this;
}

std::vector<EntityObservation> observe_entities(const AnnotatedDocument& doc,
                                                const GenerationTrace& trace,
                                                const AlignmentResult& alignment,
                                                const EntityScores& scores) {
    if (alignment.ranges.size() != doc.entities.size() ||
        scores.values.size() != doc.entities.size()) {
        throw InputMismatchError(fmt::format(
            "document '{}': {} entities, {} aligned ranges, {} entity scores", doc.doc_id,
            doc.entities.size(), alignment.ranges.size(), scores.values.size()));
    }
    const auto word_counts = sentence_word_counts(trace);

    std::vector<EntityObservation> out;
    out.reserve(doc.entities.size());
    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        const TokenRange r = alignment.ranges[k];
        if (r.last >= trace.tokens.size() || r.first > r.last) {
            throw InputMismatchError(fmt::format("document '{}': entity {} range outside trace",
                                                 doc.doc_id, k));
        }
        std::set<PosTag> pos;
        std::set<std::optional<NerTag>> ner;
        for (std::size_t i = r.first; i <= r.last; ++i) {
            pos.insert(trace.tokens[i].pos_tag);
            ner.insert(trace.tokens[i].ner_tag);
        }
        const TokenRecord& head = trace.tokens[r.first];
        out.push_back({scores.values[k], doc.entities[k].label,
                       std::vector<PosTag>(pos.begin(), pos.end()),
                       std::vector<std::optional<NerTag>>(ner.begin(), ner.end()),
                       position_class(head, word_count_for(word_counts, head))});
    }
    return out;
}

ErrorBreakdown& ErrorBreakdown::operator+=(const ErrorBreakdown& other) {
    merge_into(pos, other.pos);
    merge_into(ner, other.ner);
    merge_into(position, other.position);
    return *this;
}

ErrorBreakdown error_breakdown(std::span<const EntityObservation> entities, double threshold) {
    ErrorBreakdown b;
    b.threshold = threshold;
    for (const auto& e : entities) {
        const bool predicted = e.score >= threshold;
        const bool actual = e.label == Label::hallucinated;
        for (PosTag t : e.pos_tags) tally(b.pos[std::string(to_string(t))], predicted, actual);
        for (const auto& t : e.ner_tags) tally(b.ner[ner_key(t)], predicted, actual);
        tally(b.position[std::string(to_string(e.position))], predicted, actual);
    }
    return b;
}

TagCount& TagCount::operator+=(const TagCount& other) {
    words += other.words;
    hallucinated += other.hallucinated;
    return *this;
}

TagStats& TagStats::operator+=(const TagStats& other) {
    total_words += other.total_words;
    merge_into(pos, other.pos);
    merge_into(ner, other.ner);
    merge_into(position, other.position);
    return *this;
}

double TagStats::share(const TagCount& c, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(c.words) / static_cast<double>(total);
}

double TagStats::rate(const TagCount& c) {
    return c.words == 0 ? 0.0 : static_cast<double>(c.hallucinated) / static_cast<double>(c.words);
}

TagStats tag_stats(const AnnotatedDocument& doc, const GenerationTrace& trace,
                   const AlignmentResult& alignment) {
    if (alignment.ranges.size() != doc.entities.size()) {
        throw InputMismatchError(fmt::format("document '{}': {} entities but {} aligned ranges",
                                             doc.doc_id, doc.entities.size(),
                                             alignment.ranges.size()));
    }
    const auto word_counts = sentence_word_counts(trace);
    TagStats stats;
    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        const TokenRange r = alignment.ranges[k];
        const std::size_t hallucinated = doc.entities[k].label == Label::hallucinated ? 1 : 0;
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t i = r.first; i <= r.last && i < trace.tokens.size(); ++i) {
            const TokenRecord& t = trace.tokens[i];
            if (!seen.emplace(t.sentence_index, t.word_index_in_sentence).second) continue;
            const TagCount c{1, hallucinated};
            stats.total_words += 1;
            stats.pos[std::string(to_string(t.pos_tag))] += c;
            stats.ner[ner_key(t.ner_tag)] += c;
            stats.position[std::string(to_string(position_class(t, word_count_for(word_counts, t))))] += c;
        }
    }
    return stats;
}

std::string render_sample_html(const AnnotatedDocument& doc, const EntityScores& scores) {
    if (scores.values.size() != doc.entities.size()) {
        throw InputMismatchError(fmt::format("document '{}': {} entity scores for {} entities",
                                             doc.doc_id, scores.values.size(),
                                             doc.entities.size()));
    }
    const auto index = utf8::ScalarIndex::build(doc.generated_text);
    if (!index) throw InputMismatchError(fmt::format("document '{}': invalid UTF-8", doc.doc_id));

    double lo = 0.0;
    double hi = 0.0;
    if (!scores.values.empty()) {
        const auto [mn, mx] = std::minmax_element(scores.values.begin(), scores.values.end());
        lo = *mn;
        hi = *mx;
    }

    std::string out;
    out += fmt::format("<div class=\"hs-doc\" data-doc-id=\"{}\" data-method=\"{}\">\n",
                       html_escape(doc.doc_id), to_string(scores.method));
    out += fmt::format("<h3>{}</h3>\n<p>", html_escape(doc.name));
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        const Entity& e = doc.entities[k];
        out += html_escape(index->slice(doc.generated_text, cursor, e.char_start));
        const double intensity = hi > lo ? (scores.values[k] - lo) / (hi - lo) : 0.0;
        const bool hallucinated = e.label == Label::hallucinated;
        out += fmt::format(
            "<span class=\"hs-ent{}\" style=\"background-color:rgba(220,38,38,{:.3f});{}\" "
            "title=\"score={:.6g}\">{}</span>",
            hallucinated ? " hs-hallucinated" : "", intensity,
            hallucinated ? "outline:2px solid #991b1b;" : "", scores.values[k],
            html_escape(index->slice(doc.generated_text, e.char_start, e.char_end)));
        cursor = e.char_end;
    }
    out += html_escape(index->slice(doc.generated_text, cursor, index->length()));
    out += "</p>\n</div>\n";
    return out;
}

std::string render_breakdown_svg(std::string_view title, const ConfusionTable& table,
                                 std::span<const std::string> order) {
    constexpr int kBar = 14;
    constexpr int kGap = 12;
    constexpr int kPlotHeight = 200;
    constexpr int kLeft = 40;
    constexpr int kTop = 30;

    std::vector<std::string> keys;
    for (const auto& k : order) {
        if (table.count(k)) keys.push_back(k);
    }
    const int width = kLeft + static_cast<int>(keys.size()) * (2 * kBar + kGap) + kGap;
    const int height = kTop + kPlotHeight + 70;

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
        "font-family=\"sans-serif\" font-size=\"10\">\n",
        std::max(width, 200), height);
    svg += fmt::format("<text x=\"{}\" y=\"16\" font-size=\"12\">{}</text>\n", kLeft,
                       html_escape(title));
    const int base_y = kTop + kPlotHeight;
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000\"/>\n",
                       kLeft, kTop, base_y);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000\"/>\n",
                       kLeft, base_y, std::max(width, 200));
    for (int tick = 0; tick <= 4; ++tick) {
        const int y = base_y - tick * kPlotHeight / 4;
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n",
                           kLeft - 4, y + 3, tick * 0.25);
    }

    int x = kLeft + kGap;
    for (const auto& key : keys) {
        const ConfusionCell& c = table.at(key);
        const auto bar = [&](std::optional<double> v, int bx, std::string_view color,
                             std::string_view name) {
            const double value = v.value_or(0.0);
            const int h = static_cast<int>(value * kPlotHeight + 0.5);
            svg += fmt::format(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\">"
                "<title>{} {}: {}</title></rect>\n",
                bx, base_y - h, kBar, h, color, html_escape(key), name,
                v ? fmt::format("{:.3f}", *v) : std::string("n/a"));
        };
        bar(c.fpr(), x, "#2563eb", "FPR");
        bar(c.fnr(), x + kBar, "#dc2626", "FNR");
        svg += fmt::format(
            "<text x=\"{0}\" y=\"{1}\" transform=\"rotate(45 {0} {1})\">{2}</text>\n",
            x + kBar / 2, base_y + 12, html_escape(key));
        x += 2 * kBar + kGap;
    }
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#2563eb\"/>"
                       "<text x=\"{}\" y=\"{}\">FPR</text>\n",
                       kLeft, height - 14, kLeft + 14, height - 5);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#dc2626\"/>"
                       "<text x=\"{}\" y=\"{}\">FNR</text>\n",
                       kLeft + 50, height - 14, kLeft + 64, height - 5);
    svg += "</svg>\n";
    return svg;
}

const std::vector<std::string>& pos_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (std::size_t i = 0; i < kPosTagCount; ++i) {
            k.emplace_back(to_string(static_cast<PosTag>(i)));
        }
        return k;
    }();
    return keys;
}

const std::vector<std::string>& ner_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k{std::string(kNoNerTag)};
        for (std::size_t i = 0; i < kNerTagCount; ++i) {
            k.emplace_back(to_string(static_cast<NerTag>(i)));
        }
        return k;
    }();
    return keys;
}

const std::vector<std::string>& position_keys() {
    static const std::vector<std::string> keys = {"first", "middle", "last"};
    return keys;
}

}  // namespace halluscore
