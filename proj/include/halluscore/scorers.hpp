#pragma once

// Token-level uncertainty scores. Each scorer maps a trace to one value per
// token; larger values mean the model was less sure of that token.

#include <cstddef>
#include <span>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

struct FocusConfig {
    /// Weight of the score propagated from earlier tokens.
    double gamma = 0.9;
};

/// Tokens where CCP had no usable entail/contradict mass and fell back to
/// the token's negative log-likelihood.
struct CcpDiagnostics {
    std::vector<std::size_t> fallback_tokens;
};

/// -log p(x_i | x_<i).
TokenScores score_likelihood(const GenerationTrace& trace);

/// Entropy of the next-token distribution, in nats.
TokenScores score_entropy(const GenerationTrace& trace);

/// Claim-conditioned probability: entailing alternative mass over entailing
/// plus contradicting mass, as a negative log. Neutral alternatives are
/// ignored. Throws ScorerError for a token without alternatives.
TokenScores score_ccp(const GenerationTrace& trace, CcpDiagnostics* diagnostics = nullptr);

/// Negative log-likelihood scaled by the token's relevance weight.
TokenScores score_sar(const GenerationTrace& trace);

/// Keyword-filtered IDF-adjusted surprisal plus perplexity, with scores of
/// earlier tokens propagated through the normalized attention row.
/// Throws ScorerError when attention is missing, malformed or negative.
TokenScores score_focus(const GenerationTrace& trace, const FocusConfig& cfg = {});

/// Per-token base term of Focus: -adjusted_logprob + 2^adjusted_entropy_bits.
double focus_base_term(const TokenRecord& token);

/// The Focus recurrence over precomputed base terms. Computed left to right;
/// value i is base[i] + gamma * p_i for keywords and 0 otherwise, where p_i
/// is the attention-weighted mean of the final values of tokens 0..i-1.
/// A row with zero total mass propagates nothing.
std::vector<double> propagate_focus(std::span<const double> base,
                                    const std::vector<bool>& is_keyword,
                                    const AttentionRows& attention, double gamma);

/// Dispatches on `method`. `ccp_diagnostics` is only touched for CCP.
TokenScores score(Method method, const GenerationTrace& trace, const FocusConfig& cfg = {},
                  CcpDiagnostics* ccp_diagnostics = nullptr);

}  // namespace halluscore
