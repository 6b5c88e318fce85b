#include "halluscore/scorers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "halluscore/error.hpp"

namespace halluscore {

namespace {

TokenScores make_scores(const GenerationTrace& trace, Method method) {
    TokenScores s;
    s.doc_id = trace.doc_id;
    s.method = method;
    s.values.reserve(trace.tokens.size());
    return s;
}

// 0.0 - x keeps -0.0 out of the output.
double negate(double x) { return 0.0 - x; }

}  // namespace

TokenScores score_likelihood(const GenerationTrace& trace) {
    auto s = make_scores(trace, Method::likelihood);
    for (const auto& t : trace.tokens) s.values.push_back(negate(t.logprob));
    return s;
}

TokenScores score_entropy(const GenerationTrace& trace) {
    auto s = make_scores(trace, Method::entropy);
    for (const auto& t : trace.tokens) s.values.push_back(t.entropy_nats);
    return s;
}

TokenScores score_ccp(const GenerationTrace& trace, CcpDiagnostics* diagnostics) {
    auto s = make_scores(trace, Method::ccp);
    for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
        const TokenRecord& t = trace.tokens[i];
        if (t.alternatives.empty()) {
            throw ScorerError(fmt::format("document '{}': token {} has no alternatives for CCP",
                                          trace.doc_id, i));
        }
        double entail = 0.0;
        double decided = 0.0;
        for (const Alternative& a : t.alternatives) {
            if (a.nli_relation == NliRelation::neutral) continue;
            const double p = std::exp(a.logprob);
            decided += p;
            if (a.nli_relation == NliRelation::entail) entail += p;
        }
        if (decided <= 0.0 || entail <= 0.0) {
            s.values.push_back(negate(t.logprob));
            if (diagnostics) diagnostics->fallback_tokens.push_back(i);
            continue;
        }
        const double ratio = entail / decided;
        s.values.push_back(ratio >= 1.0 ? 0.0 : -std::log(ratio));
    }
    return s;
}

TokenScores score_sar(const GenerationTrace& trace) {
    auto s = make_scores(trace, Method::sar);
    for (const auto& t : trace.tokens) s.values.push_back(negate(t.logprob) * t.relevance_weight);
    return s;
}

double focus_base_term(const TokenRecord& token) {
    return negate(token.adjusted_logprob) + std::exp2(token.adjusted_entropy_bits);
}

std::vector<double> propagate_focus(std::span<const double> base,
                                    const std::vector<bool>& is_keyword,
                                    const AttentionRows& attention, double gamma) {
    const std::size_t n = base.size();
    if (is_keyword.size() != n || attention.size() != n) {
        throw ScorerError(fmt::format(
            "focus: {} base terms, {} keyword flags and {} attention rows do not match", n,
            is_keyword.size(), attention.size()));
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw ScorerError(fmt::format("focus: gamma must be finite and >= 0, got {}", gamma));
    }

    std::vector<double> values(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = attention[i];
        if (row.size() != i) {
            throw ScorerError(
                fmt::format("focus: attention row {} has {} entries, expected {}", i, row.size(), i));
        }
        double mass = 0.0;
        double weighted = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            const double a = row[j];
            if (!(a >= 0.0) || !std::isfinite(a)) {
                throw ScorerError(fmt::format("focus: attention[{}][{}] = {} is negative or non-finite",
                                              i, j, a));
            }
            mass += a;
            weighted += a * values[j];
        }
        if (!is_keyword[i]) continue;
        const double propagated = mass > 0.0 ? weighted / mass : 0.0;
        values[i] = base[i] + gamma * propagated;
    }
    return values;
}

TokenScores score_focus(const GenerationTrace& trace, const FocusConfig& cfg) {
    if (!trace.attention) {
        throw ScorerError(
            fmt::format("document '{}': Focus needs attention but the trace has none", trace.doc_id));
    }
    std::vector<double> base;
    std::vector<bool> keyword;
    base.reserve(trace.tokens.size());
    keyword.reserve(trace.tokens.size());
    for (const auto& t : trace.tokens) {
        base.push_back(focus_base_term(t));
        keyword.push_back(t.is_keyword);
    }
    auto s = make_scores(trace, Method::focus);
    try {
        s.values = propagate_focus(base, keyword, *trace.attention, cfg.gamma);
    } catch (const ScorerError& e) {
        throw ScorerError(fmt::format("document '{}': {}", trace.doc_id, e.what()));
    }
    return s;
}

TokenScores score(Method method, const GenerationTrace& trace, const FocusConfig& cfg,
                  CcpDiagnostics* ccp_diagnostics) {
    switch (method) {
        case Method::likelihood: return score_likelihood(trace);
        case Method::entropy: return score_entropy(trace);
        case Method::ccp: return score_ccp(trace, ccp_diagnostics);
        case Method::sar: return score_sar(trace);
        case Method::focus: return score_focus(trace, cfg);
    }
    throw ScorerError("unknown scoring method");
}

}  // namespace halluscore
