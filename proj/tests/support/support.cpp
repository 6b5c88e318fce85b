#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "halluscore/scorers.hpp"
#include "halluscore/utf8.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace halluscore;

fs::path fixture(const std::string& name) { return fs::path(HALLUSCORE_TEST_DIR) / "fixtures" / name; }
fs::path golden(const std::string& name) { return fs::path(HALLUSCORE_TEST_DIR) / "golden" / name; }

TempDir::TempDir(const std::string& tag) {
    static std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> pick;
    for (;;) {
        path_ = fs::temp_directory_path() /
                ("halluscore-" + tag + "-" + std::to_string(pick(rd) % 1000000000ULL));
        if (fs::create_directories(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

const std::vector<std::string> kWords = {
    "the", "of", "and", "was", "born", "in", "Paris", "London", "Zürich", "Gödel", "1949",
    "December", "18,", "physicist", "composer", "studied", "at", "Université", "naïve",
    "Ελλάδα", "東京", "award", "received", "her", "his", "first", "novel", "🙂", "café", "Straße",
};

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

NliRelation random_relation(Rng& rng) {
    switch (pick(rng, 0, 3)) {
        case 0: return NliRelation::entail;
        case 1: return NliRelation::neutral;
        default: return NliRelation::contradict;
    }
}

}  // namespace

GenerationTrace random_trace(Rng& rng, const std::string& doc_id, const TraceShape& shape) {
    GenerationTrace t;
    t.doc_id = doc_id;
    const std::size_t n_words = pick(rng, shape.min_words, shape.max_words);
    std::size_t sentence = 0;
    std::size_t word_in_sentence = 0;
    std::size_t scalar_pos = 0;

    for (std::size_t w = 0; w < n_words; ++w) {
        if (w > 0) {
            t.generated_text += ' ';
            ++scalar_pos;
        }
        const std::string& word = kWords[pick(rng, 0, kWords.size() - 1)];
        const std::size_t len = *utf8::scalar_length(word);
        t.generated_text += word;

        // Split into up to three pieces on scalar boundaries.
        std::vector<std::size_t> cuts = {0, len};
        const std::size_t extra = len >= 3 ? pick(rng, 0, 2) : (len == 2 ? pick(rng, 0, 1) : 0);
        std::set<std::size_t> inner;
        while (inner.size() < extra) inner.insert(pick(rng, 1, len - 1));
        cuts.insert(cuts.end(), inner.begin(), inner.end());
        std::sort(cuts.begin(), cuts.end());

        const auto index = *utf8::ScalarIndex::build(word);
        const bool keyword_word = pick(rng, 0, 2) != 0;
        const PosTag pos = static_cast<PosTag>(pick(rng, 0, kPosTagCount - 1));
        std::optional<NerTag> ner;
        if (pick(rng, 0, 2) == 0) ner = static_cast<NerTag>(pick(rng, 0, kNerTagCount - 1));

        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            TokenRecord tok;
            tok.text = std::string(index.slice(word, cuts[c], cuts[c + 1]));
            tok.char_start = scalar_pos + cuts[c];
            tok.char_end = scalar_pos + cuts[c + 1];
            tok.logprob = pick(rng, 0, 30) == 0 ? 0.0 : -uniform(rng, 1e-4, 8.0);
            tok.entropy_nats = uniform(rng, 0.0, 4.0);
            tok.relevance_weight = pick(rng, 0, 20) == 0 ? 1.0 : uniform(rng, 0.0, 1.0);
            tok.adjusted_logprob = tok.logprob * uniform(rng, 0.3, 2.5);
            tok.adjusted_entropy_bits = uniform(rng, 0.0, 5.0);
            tok.is_keyword = keyword_word;
            tok.pos_tag = pos;
            tok.ner_tag = ner;
            tok.sentence_index = sentence;
            tok.word_index_in_sentence = word_in_sentence;

            tok.alternatives.push_back({tok.text, tok.logprob, NliRelation::entail, true});
            const std::size_t n_alt = pick(rng, 0, 10);
            double remaining = std::max(0.0, 1.0 - std::exp(tok.logprob));
            for (std::size_t k = 0; k < n_alt && remaining > 1e-12; ++k) {
                const double mass = remaining * uniform(rng, 0.05, 0.6);
                remaining -= mass;
                tok.alternatives.push_back(
                    {tok.text + "#" + std::to_string(k), std::log(mass), random_relation(rng), false});
            }
            std::shuffle(tok.alternatives.begin(), tok.alternatives.end(), rng);
            t.tokens.push_back(std::move(tok));
        }
        scalar_pos += len;
        ++word_in_sentence;
        if (pick(rng, 0, 11) == 0) {
            ++sentence;
            word_in_sentence = 0;
        }
    }

    if (shape.with_attention) {
        AttentionRows rows(t.tokens.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i].resize(i, 0.0f);
            if (i == 0 || uniform(rng, 0.0, 1.0) < shape.zero_row_rate) continue;
            for (auto& a : rows[i]) {
                a = pick(rng, 0, 4) == 0 ? 0.0f : static_cast<float>(uniform(rng, 0.0, 1.0));
            }
        }
        t.attention = std::move(rows);
    }
    return t;
}

AnnotatedDocument random_document(Rng& rng, const GenerationTrace& trace) {
    AnnotatedDocument doc;
    doc.doc_id = trace.doc_id;
    doc.name = "Synthetic " + trace.doc_id;
    doc.generated_text = trace.generated_text;
    const auto index = *utf8::ScalarIndex::build(trace.generated_text);
    const std::size_t len = index.length();

    std::size_t cursor = 0;
    while (cursor < len) {
        const std::size_t gap = pick(rng, 0, 12);
        const std::size_t start = cursor + gap;
        if (start >= len) break;
        const std::size_t end = std::min(len, start + pick(rng, 1, 14));
        Entity e;
        e.entity_id = static_cast<int>(doc.entities.size());
        e.char_start = start;
        e.char_end = end;
        e.surface = std::string(index.slice(trace.generated_text, start, end));
        e.label = pick(rng, 0, 4) == 0 ? Label::hallucinated : Label::supported;
        // Entities made only of whitespace overlap no token; skip those.
        if (e.surface.find_first_not_of(' ') != std::string::npos) doc.entities.push_back(e);
        cursor = end;
    }
    if (doc.entities.empty()) {
        const TokenRecord& tok = trace.tokens.front();
        doc.entities.push_back({0, tok.text, tok.char_start, tok.char_end, Label::supported});
    }
    for (std::size_t k = 0; k < doc.entities.size(); ++k) doc.entities[k].entity_id = static_cast<int>(k);
    return doc;
}

LabeledScores random_labeled_scores(Rng& rng, std::size_t n, double tie_rate) {
    LabeledScores out;
    std::vector<double> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(uniform(rng, -2.0, 2.0));
    const double base_rate = uniform(rng, 0.05, 0.8);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = uniform(rng, 0.0, 1.0) < base_rate ? 1 : 0;
        double s = uniform(rng, 0.0, 1.0) < tie_rate ? pool[pick(rng, 0, pool.size() - 1)]
                                                     : uniform(rng, -2.0, 2.0) + 0.8 * y;
        out.labels.push_back(y);
        out.scores.push_back(s);
    }
    out.labels[0] = 1;
    out.labels[n - 1] = 0;
    return out;
}

double oracle_auroc(const std::vector<int>& labels, const std::vector<double>& scores) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

double oracle_auprc(const std::vector<int>& labels, const std::vector<double>& scores) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    double prev_recall = 0.0;
    double ap = 0.0;
    for (double t : thresholds) {
        double tp = 0.0;
        double predicted = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                predicted += 1.0;
                tp += labels[i];
            }
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    return ap;
}

OperatingPoint oracle_f1(const std::vector<int>& labels, const std::vector<double>& scores) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const long long positives = std::count(labels.begin(), labels.end(), 1);

    long long best_tp = -1;
    long long best_fp = 0;
    double best_t = 0.0;
    for (double t : thresholds) {
        long long tp = 0;
        long long fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
        }
        if (best_tp < 0) {
            best_tp = tp;
            best_fp = fp;
            best_t = t;
            continue;
        }
        // F1 = 2tp / (2tp + fp + fn) = 2tp / (tp + fp + P).
        const long long lhs = 2 * tp * (best_tp + best_fp + positives);
        const long long rhs = 2 * best_tp * (tp + fp + positives);
        // precision with 0/0 read as 0
        const long long pl = (tp + fp) == 0 ? 0 : tp * std::max(1LL, best_tp + best_fp);
        const long long pr = (best_tp + best_fp) == 0 ? 0 : best_tp * std::max(1LL, tp + fp);
        const bool better = lhs > rhs || (lhs == rhs && pl > pr) ||
                            (lhs == rhs && pl == pr && t > best_t);
        if (better) {
            best_tp = tp;
            best_fp = fp;
            best_t = t;
        }
    }
    OperatingPoint op;
    op.threshold = best_t;
    if (best_tp > 0) {
        op.precision = static_cast<double>(best_tp) / static_cast<double>(best_tp + best_fp);
        op.recall = static_cast<double>(best_tp) / static_cast<double>(positives);
        op.f1 = 2.0 * op.precision * op.recall / (op.precision + op.recall);
    }
    return op;
}

std::vector<TokenRange> oracle_align(const AnnotatedDocument& doc, const GenerationTrace& trace) {
    std::vector<TokenRange> out;
    for (const Entity& e : doc.entities) {
        std::optional<std::size_t> first;
        std::size_t last = 0;
        for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
            const auto& t = trace.tokens[i];
            const bool overlaps = std::max(t.char_start, e.char_start) < std::min(t.char_end, e.char_end);
            if (!overlaps) continue;
            if (!first) first = i;
            last = i;
        }
        out.push_back({first.value_or(0), last});
    }
    return out;
}

TokenRecord make_token(std::size_t start, std::size_t end, double logprob) {
    TokenRecord t;
    t.text = std::string(end - start, 'x');
    t.char_start = start;
    t.char_end = end;
    t.logprob = logprob;
    t.adjusted_logprob = logprob;
    t.pos_tag = PosTag::NOUN;
    t.alternatives.push_back({t.text, logprob, NliRelation::entail, true});
    return t;
}

// ---- property checks ---------------------------------------------------------

std::string check_ccp_monotonicity(Rng& rng, const GenerationTrace& trace) {
    CcpDiagnostics diag;
    const auto base = score_ccp(trace, &diag).values;
    std::vector<bool> fallback(trace.tokens.size(), false);
    for (std::size_t i : diag.fallback_tokens) fallback[i] = true;

    auto with_contradict = trace;
    auto with_neutral = trace;
    for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
        double mass = 0.0;
        for (const auto& a : trace.tokens[i].alternatives) {
            if (a.nli_relation != NliRelation::neutral) mass += std::exp(a.logprob);
        }
        const double added = std::max(mass, 1e-3) * uniform(rng, 0.05, 0.5);
        with_contradict.tokens[i].alternatives.push_back(
            {"contra", std::log(added), NliRelation::contradict, false});
        with_neutral.tokens[i].alternatives.push_back(
            {"neutral", std::log(added), NliRelation::neutral, false});
    }
    const auto up = score_ccp(with_contradict).values;
    const auto same = score_ccp(with_neutral).values;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (same[i] != base[i]) {
            return fmt::format("{} token {}: neutral alternative moved CCP {} -> {}", trace.doc_id,
                               i, base[i], same[i]);
        }
        if (!fallback[i] && !(up[i] > base[i])) {
            return fmt::format("{} token {}: contradicting alternative did not raise CCP ({} -> {})",
                               trace.doc_id, i, base[i], up[i]);
        }
    }
    return {};
}

std::string check_sar_dominance(const GenerationTrace& trace) {
    const auto sar = score_sar(trace).values;
    const auto lik = score_likelihood(trace).values;
    for (std::size_t i = 0; i < sar.size(); ++i) {
        if (sar[i] > lik[i]) {
            return fmt::format("{} token {}: SAR {} > likelihood {}", trace.doc_id, i, sar[i], lik[i]);
        }
    }
    return {};
}

std::string check_focus_locality(const GenerationTrace& trace) {
    const auto v = score_focus(trace, {0.0}).values;
    // Perturb all earlier context: values must not move.
    auto shuffled = trace;
    for (auto& row : *shuffled.attention) std::reverse(row.begin(), row.end());
    const auto w = score_focus(shuffled, {0.0}).values;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& t = trace.tokens[i];
        const double expected = t.is_keyword ? focus_base_term(t) : 0.0;
        if (v[i] != expected || w[i] != expected) {
            return fmt::format("{} token {}: gamma=0 Focus {} / {} != local term {}", trace.doc_id,
                               i, v[i], w[i], expected);
        }
    }
    return {};
}

std::string check_attention_scaling(Rng& rng, const GenerationTrace& trace) {
    const auto base = score_focus(trace).values;
    const auto scaled_scores = [&](float c) {
        auto t = trace;
        for (auto& row : *t.attention) {
            for (auto& a : row) a *= c;
        }
        return score_focus(t).values;
    };
    const float pow2 = std::ldexp(1.0f, static_cast<int>(pick(rng, 0, 16)) - 8);
    const auto exact = scaled_scores(pow2);
    const float c = static_cast<float>(uniform(rng, 0.01, 100.0));
    const auto approx = scaled_scores(c);
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (exact[i] != base[i]) {
            return fmt::format("{} token {}: scale {} moved Focus {} -> {}", trace.doc_id, i, pow2,
                               base[i], exact[i]);
        }
        if (std::abs(approx[i] - base[i]) > 1e-6 * std::max(1.0, std::abs(base[i]))) {
            return fmt::format("{} token {}: scale {} moved Focus {} -> {}", trace.doc_id, i, c,
                               base[i], approx[i]);
        }
    }
    if (base.empty()) return {};
    const auto argmax = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    };
    const std::size_t top = argmax(base);
    if (argmax(exact) != top) {
        return fmt::format("{}: scale {} moved the Focus argmax {} -> {}", trace.doc_id, pow2, top,
                           argmax(exact));
    }
    // Near-ties may swap under rounding; the new argmax must still be maximal.
    const std::size_t moved = argmax(approx);
    if (base[moved] < base[top] - 1e-6 * std::max(1.0, base[top])) {
        return fmt::format("{}: scale {} moved the Focus argmax {} -> {}", trace.doc_id, c, top, moved);
    }
    return {};
}

std::string check_mean_bounds(const TokenScores& tokens, const EntityScores& entities) {
    for (std::size_t k = 0; k < entities.values.size(); ++k) {
        const auto r = entities.token_ranges[k];
        const auto b = tokens.values.begin();
        const double lo = *std::min_element(b + r.first, b + r.last + 1);
        const double hi = *std::max_element(b + r.first, b + r.last + 1);
        if (!(lo <= entities.values[k] && entities.values[k] <= hi)) {
            return fmt::format("{} entity {}: mean {} outside [{}, {}]", tokens.doc_id, k,
                               entities.values[k], lo, hi);
        }
    }
    return {};
}

}  // namespace testsupport
