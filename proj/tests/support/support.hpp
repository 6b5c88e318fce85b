#pragma once

// Generators and brute-force reference implementations shared by the unit
// tests and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "halluscore/alignment.hpp"
#include "halluscore/metrics.hpp"
#include "halluscore/types.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

std::filesystem::path fixture(const std::string& name);
std::filesystem::path golden(const std::string& name);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct TraceShape {
    std::size_t min_words = 4;
    std::size_t max_words = 60;
    /// Probability that a row of attention carries no mass at all.
    double zero_row_rate = 0.05;
    bool with_attention = true;
};

/// A valid trace over random (partly non-ASCII) text. Words split into one to
/// three tokens; whitespace is not covered by tokens.
halluscore::GenerationTrace random_trace(Rng& rng, const std::string& doc_id,
                                         const TraceShape& shape = {});

/// Random non-overlapping entities over the trace text, some cutting through
/// token interiors. Always at least one entity.
halluscore::AnnotatedDocument random_document(Rng& rng, const halluscore::GenerationTrace& trace);

/// Labels in {0,1} with both classes present, and scores drawn from a small
/// pool when `tie_rate` fires so that ties are common.
struct LabeledScores {
    std::vector<int> labels;
    std::vector<double> scores;
};
LabeledScores random_labeled_scores(Rng& rng, std::size_t n, double tie_rate);

// ---- brute-force oracles -----------------------------------------------------

/// Direct pair enumeration.
double oracle_auroc(const std::vector<int>& labels, const std::vector<double>& scores);
/// Re-thresholds the whole list at every distinct score.
double oracle_auprc(const std::vector<int>& labels, const std::vector<double>& scores);
/// Same enumeration for F1; ties by exact cross-multiplication.
halluscore::OperatingPoint oracle_f1(const std::vector<int>& labels,
                                     const std::vector<double>& scores);
/// O(E*T) overlap scan.
std::vector<halluscore::TokenRange> oracle_align(const halluscore::AnnotatedDocument& doc,
                                                 const halluscore::GenerationTrace& trace);

// ---- property checks ---------------------------------------------------------
// Each returns an empty string when the property holds, otherwise a
// description of the first violation.

/// Adding a contradicting alternative raises CCP on every token that does not
/// fall back; adding a neutral one changes nothing.
std::string check_ccp_monotonicity(Rng& rng, const halluscore::GenerationTrace& trace);
/// SAR never exceeds likelihood.
std::string check_sar_dominance(const halluscore::GenerationTrace& trace);
/// With gamma = 0 each Focus value is its own token's base term (or 0).
std::string check_focus_locality(const halluscore::GenerationTrace& trace);
/// Scaling every attention row by a positive constant leaves Focus unchanged:
/// exactly for powers of two, within 1e-6 relative for other constants
/// (float rounding of the scaled weights). The argmax token is preserved.
std::string check_attention_scaling(Rng& rng, const halluscore::GenerationTrace& trace);
/// Every entity value lies within [min, max] of its token values.
std::string check_mean_bounds(const halluscore::TokenScores& tokens,
                              const halluscore::EntityScores& entities);

/// Minimal hand-built token used by the formula tests.
halluscore::TokenRecord make_token(std::size_t start, std::size_t end, double logprob);

}  // namespace testsupport
