// halluscore: batch front end for scoring, evaluating and analyzing
// token-level hallucination detectors.

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "halluscore/commands.hpp"

namespace cli = halluscore::cli;

namespace {

std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Token-level hallucination detection: score, evaluate and analyze."};
    app.set_config("--config", "", "TOML-style key/value file; command-line flags take precedence");
    app.require_subcommand(1);

    std::size_t workers = 0;
    const auto add_workers = [&](CLI::App* sub) {
        sub->add_option("--workers", workers, "Document worker threads (0 = one per core)")
            ->envname("HALLUSCORE_WORKERS");
    };

    cli::ValidateOptions validate;
    std::string validate_traces;
    std::string validate_out;
    auto* v = app.add_subcommand("validate", "Load and check a dataset, print its statistics");
    v->add_option("--dataset", validate.dataset, "Canonical dataset (JSONL, .gz accepted)")->required();
    v->add_option("--traces", validate_traces, "Trace bundle to check against the dataset");
    v->add_option("--out", validate_out, "Write the statistics as JSON to this file");

    cli::ScoreOptions score;
    std::string method = "all";
    auto* s = app.add_subcommand("score", "Compute token and entity scores from trace bundles");
    s->add_option("--method", method, "likelihood, entropy, ccp, sar, focus or all")
        ->capture_default_str();
    s->add_option("--traces", score.traces, "Trace bundle")->required();
    s->add_option("--dataset", score.dataset, "Canonical dataset")->required();
    s->add_option("--out", score.out, "Output directory")->required();
    s->add_option("--gamma", score.gamma, "Focus propagation weight")->capture_default_str();
    add_workers(s);

    cli::EvaluateOptions evaluate;
    auto* e = app.add_subcommand("evaluate", "Entity-level AUROC, AUPRC and optimal F1");
    e->add_option("--scores", evaluate.scores, "Score files, one per method")->required();
    e->add_option("--dataset", evaluate.dataset, "Canonical dataset")->required();
    e->add_option("--out", evaluate.out, "Output directory")->required();
    e->add_flag("--by-rate", evaluate.by_rate, "Also report per hallucination-rate group");

    cli::AnalyzeOptions analyze;
    double threshold = 0.0;
    auto* a = app.add_subcommand("analyze", "FPR/FNR breakdowns and rendered samples");
    a->add_option("--scores", analyze.scores, "Score file of one method")->required();
    a->add_option("--dataset", analyze.dataset, "Canonical dataset")->required();
    a->add_option("--traces", analyze.traces, "Trace bundle (for tags and positions)")->required();
    a->add_option("--out", analyze.out, "Output directory")->required();
    a->add_option("--breakdown", analyze.breakdown, "Tables to emit: pos, ner, position")
        ->delimiter(',')
        ->capture_default_str();
    a->add_option("--render", analyze.render, "Number of documents to render as HTML")
        ->capture_default_str();
    auto* threshold_opt =
        a->add_option("--threshold", threshold, "Decision threshold (default: F1-optimal)");
    add_workers(a);

    cli::CorrelateOptions correlate;
    std::vector<std::string> pair;
    std::string level = "entity";
    auto* c = app.add_subcommand("correlate", "Pearson correlation between two score files");
    c->add_option("--scores", pair, "Two score files")->required()->expected(2);
    c->add_option("--level", level, "token or entity")
        ->check(CLI::IsMember({"token", "entity"}))
        ->capture_default_str();

    cli::ImportOptions import;
    auto* i = app.add_subcommand("import", "Convert a published-style dataset to the canonical format");
    i->add_option("--input", import.input, "Published dataset (JSON array or JSONL)")->required();
    i->add_option("--output", import.output, "Canonical dataset to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return cli::kInputFault;
    }

    auto& out = std::cout;
    return cli::run_guarded(
        [&]() -> int {
            if (v->parsed()) {
                if (!validate_traces.empty()) validate.traces = validate_traces;
                if (!validate_out.empty()) validate.out = validate_out;
                return cli::run_validate(validate, out);
            }
            if (s->parsed()) {
                score.methods = cli::parse_method_selection(method);
                score.workers = resolve_workers(workers);
                return cli::run_score(score, out);
            }
            if (e->parsed()) return cli::run_evaluate(evaluate, out);
            if (a->parsed()) {
                if (threshold_opt->count() > 0) analyze.threshold = threshold;
                analyze.workers = resolve_workers(workers);
                return cli::run_analyze(analyze, out);
            }
            if (c->parsed()) {
                correlate.a = pair.at(0);
                correlate.b = pair.at(1);
                correlate.level = level == "token" ? cli::CorrelationLevel::token
                                                   : cli::CorrelationLevel::entity;
                return cli::run_correlate(correlate, out);
            }
            return cli::run_import(import, out);
        },
        std::cerr);
}
