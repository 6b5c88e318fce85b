#pragma once

// In-process implementations of the halluscore subcommands. Each run_*
// function writes its report files, prints a summary to `out`, and returns
// an exit status; faults propagate as exceptions. run_guarded maps those
// exceptions onto exit statuses.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore::cli {

enum ExitCode : int {
    kSuccess = 0,
    /// Output was produced, but with warnings worth reading.
    kWarnings = 1,
    kInputFault = 2,
    kInternalFault = 3,
};

struct ValidateOptions {
    std::filesystem::path dataset;
    std::optional<std::filesystem::path> traces;
    /// Optional JSON copy of the statistics.
    std::optional<std::filesystem::path> out;
};

struct ScoreOptions {
    std::vector<Method> methods;
    std::filesystem::path traces;
    std::filesystem::path dataset;
    /// Directory receiving <method>.scores.jsonl and score_diagnostics.json.
    std::filesystem::path out;
    double gamma = 0.9;
    std::size_t workers = 1;
};

struct EvaluateOptions {
    std::vector<std::filesystem::path> scores;
    std::filesystem::path dataset;
    /// Directory receiving evaluation.json and evaluation.csv.
    std::filesystem::path out;
    bool by_rate = false;
};

struct AnalyzeOptions {
    std::filesystem::path scores;
    std::filesystem::path dataset;
    std::filesystem::path traces;
    std::filesystem::path out;
    /// Any of "pos", "ner", "position".
    std::vector<std::string> breakdown = {"pos", "ner", "position"};
    std::size_t render = 0;
    /// Defaults to the F1-optimal threshold of the score file.
    std::optional<double> threshold;
    std::size_t workers = 1;
};

enum class CorrelationLevel { token, entity };

struct CorrelateOptions {
    std::filesystem::path a;
    std::filesystem::path b;
    CorrelationLevel level = CorrelationLevel::entity;
};

struct ImportOptions {
    std::filesystem::path input;
    std::filesystem::path output;
};

/// Parses "all" or a comma-free single method name.
std::vector<Method> parse_method_selection(const std::string& name);

int run_validate(const ValidateOptions& opts, std::ostream& out);
int run_score(const ScoreOptions& opts, std::ostream& out);
int run_evaluate(const EvaluateOptions& opts, std::ostream& out);
int run_analyze(const AnalyzeOptions& opts, std::ostream& out);
int run_correlate(const CorrelateOptions& opts, std::ostream& out);
int run_import(const ImportOptions& opts, std::ostream& out);

/// Runs `fn`, printing any fault to `err`. Input faults (parse errors,
/// inconsistent inputs, bad usage, I/O failures) return kInputFault;
/// anything else returns kInternalFault.
int run_guarded(const std::function<int()>& fn, std::ostream& err);

}  // namespace halluscore::cli
