#include "halluscore/commands.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "halluscore/aggregation.hpp"
#include "halluscore/alignment.hpp"
#include "halluscore/analysis.hpp"
#include "halluscore/error.hpp"
#include "halluscore/io.hpp"
#include "halluscore/metrics.hpp"
#include "halluscore/scorers.hpp"
#include "json_util.hpp"

namespace halluscore::cli {

namespace fs = std::filesystem;
using io::detail::Json;

namespace {

using DocIndex = std::unordered_map<std::string, const AnnotatedDocument*>;

DocIndex index_documents(const std::vector<AnnotatedDocument>& docs) {
    DocIndex index;
    for (const auto& d : docs) index.emplace(d.doc_id, &d);
    return index;
}

template <class Result>
struct TraceSweep {
    /// Keyed by doc_id, so iteration is in doc_id order.
    std::map<std::string, Result> results;
    /// Traces whose doc_id is not in the dataset.
    std::vector<std::string> unused;
};

/// Streams a trace bundle and applies `fn(doc, trace, line)` to every trace
/// with a matching dataset document on a pool of `workers` threads. Fails if
/// a doc_id repeats or a dataset document has no trace.
template <class Result, class Fn>
TraceSweep<Result> sweep_traces(const fs::path& path, const DocIndex& docs, std::size_t workers,
                                Fn fn) {
    struct Job {
        const AnnotatedDocument* doc;
        GenerationTrace trace;
        std::size_t line;
    };

    TraceSweep<Result> sweep;
    std::mutex mutex;
    std::condition_variable can_push;
    std::condition_variable can_pop;
    std::deque<Job> queue;
    bool done = false;
    std::exception_ptr failure;
    const std::size_t capacity = 2 * std::max<std::size_t>(workers, 1);

    const auto run_job = [&](Job& job) {
        Result r = fn(*job.doc, job.trace, job.line);
        std::lock_guard lock(mutex);
        sweep.results.emplace(job.doc->doc_id, std::move(r));
    };
    const auto fail = [&](std::exception_ptr e) {
        std::lock_guard lock(mutex);
        if (!failure) failure = e;
        can_push.notify_all();
        can_pop.notify_all();
    };
    const auto worker = [&] {
        for (;;) {
            Job job;
            {
                std::unique_lock lock(mutex);
                can_pop.wait(lock, [&] { return !queue.empty() || done || failure; });
                if (failure || queue.empty()) return;
                job = std::move(queue.front());
                queue.pop_front();
            }
            can_push.notify_one();
            try {
                run_job(job);
            } catch (...) {
                fail(std::current_exception());
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    if (workers > 1) {
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    const auto finish = [&] {
        {
            std::lock_guard lock(mutex);
            done = true;
        }
        can_pop.notify_all();
        for (auto& t : pool) t.join();
        pool.clear();
    };

    std::set<std::string> seen;
    try {
        io::TraceReader reader(path);
        while (auto trace = reader.next()) {
            if (!seen.insert(trace->doc_id).second) {
                throw ParseError(path.string(), reader.line_number(),
                                 fmt::format("duplicate trace for doc_id '{}'", trace->doc_id));
            }
            const auto it = docs.find(trace->doc_id);
            if (it == docs.end()) {
                sweep.unused.push_back(trace->doc_id);
                continue;
            }
            Job job{it->second, std::move(*trace), reader.line_number()};
            if (pool.empty()) {
                run_job(job);
                continue;
            }
            std::unique_lock lock(mutex);
            can_push.wait(lock, [&] { return queue.size() < capacity || failure; });
            if (failure) break;
            queue.push_back(std::move(job));
            lock.unlock();
            can_pop.notify_one();
        }
    } catch (...) {
        fail(std::current_exception());
    }
    finish();
    if (failure) std::rethrow_exception(failure);

    std::vector<std::string> missing;
    for (const auto& [id, doc] : docs) {
        if (!seen.count(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
        std::string list;
        for (std::size_t i = 0; i < shown; ++i) list += (i ? ", " : "") + missing[i];
        if (shown < missing.size()) list += fmt::format(", ... ({} more)", missing.size() - shown);
        throw InputMismatchError(fmt::format("{}: no trace for {} dataset document(s): {}",
                                             path.string(), missing.size(), list));
    }
    std::sort(sweep.unused.begin(), sweep.unused.end());
    return sweep;
}

void check_trace(const GenerationTrace& trace, const fs::path& path, std::size_t line) {
    const auto issues = validate_trace(trace);
    if (issues.empty()) return;
    std::string msg = fmt::format("trace '{}': {}", trace.doc_id, issues.front());
    if (issues.size() > 1) msg += fmt::format(" (and {} more)", issues.size() - 1);
    throw ParseError(path.string(), line, msg);
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Error(fmt::format("{}: cannot create output directory", dir.string()));
    }
}

std::string file_safe(std::string_view id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_';
        out += ok ? c : '_';
    }
    return out.substr(0, 64);
}

std::map<std::string, io::ScoreRecord> index_scores(std::vector<io::ScoreRecord> records,
                                                   const fs::path& path) {
    std::map<std::string, io::ScoreRecord> out;
    for (auto& r : records) {
        const std::string id = r.tokens.doc_id;
        if (!out.emplace(id, std::move(r)).second) {
            throw InputMismatchError(
                fmt::format("{}: doc_id '{}' appears more than once", path.string(), id));
        }
    }
    return out;
}

void print_stats(std::ostream& out, const io::DatasetStats& s) {
    out << fmt::format("documents                {}\n", s.documents)
        << fmt::format("entities                 {}\n", s.entities)
        << fmt::format("unique entities          {}\n", s.unique_entities)
        << fmt::format("hallucinated entities    {}\n", s.hallucinated)
        << fmt::format("hallucination rate       {:.4f}\n", s.hallucination_rate)
        << fmt::format("mean words per entity    {:.4f}\n", s.mean_words_per_entity)
        << fmt::format("mean entities per doc    {:.2f}\n", s.mean_entities_per_document);
    std::string groups;
    for (RateGroup g : kAllRateGroups) {
        const auto it = s.group_sizes.find(g);
        groups += fmt::format("{}{}={}", groups.empty() ? "" : " ", to_string(g),
                              it == s.group_sizes.end() ? 0 : it->second);
    }
    out << "rate groups              " << groups << "\n";
    std::string hist;
    for (std::size_t b = 0; b < s.rate_histogram.size(); ++b) {
        hist += fmt::format("{}{}", b ? " " : "", s.rate_histogram[b]);
    }
    out << "rate histogram (5% bins) " << hist << "\n";
}

}  // namespace

std::vector<Method> parse_method_selection(const std::string& name) {
    if (name == "all") return {kAllMethods.begin(), kAllMethods.end()};
    const auto m = parse_method(name);
    if (!m) throw UsageError(fmt::format("unknown method '{}'", name));
    return {*m};
}

// ---- validate ---------------------------------------------------------------

int run_validate(const ValidateOptions& opts, std::ostream& out) {
    const auto dataset = io::load_dataset(opts.dataset);
    const auto stats = io::dataset_stats(dataset);
    out << fmt::format("dataset {}\n", opts.dataset.string());
    print_stats(out, stats);
    if (opts.out) io::write_file(*opts.out, io::stats_to_json(stats));
    if (!opts.traces) return kSuccess;

    const auto docs = index_documents(dataset);
    const auto sweep = sweep_traces<std::vector<AlignmentWarning>>(
        *opts.traces, docs, 1,
        [&](const AnnotatedDocument& doc, const GenerationTrace& trace, std::size_t line) {
            check_trace(trace, *opts.traces, line);
            return align(doc, trace).warnings;
        });

    std::size_t warnings = 0;
    out << fmt::format("alignment ({} traces)\n", sweep.results.size());
    for (const auto& [id, list] : sweep.results) {
        for (const auto& w : list) {
            out << fmt::format("  {}: entity {}: {}\n", id, w.entity_index, w.message);
            ++warnings;
        }
    }
    for (const auto& id : sweep.unused) {
        out << fmt::format("  {}: trace has no dataset document\n", id);
        ++warnings;
    }
    out << fmt::format("alignment warnings       {}\n", warnings);
    return warnings == 0 ? kSuccess : kWarnings;
}

// ---- score ------------------------------------------------------------------

int run_score(const ScoreOptions& opts, std::ostream& out) {
    if (opts.methods.empty()) throw UsageError("no scoring method selected");
    if (!(opts.gamma >= 0.0)) throw UsageError("--gamma must be a non-negative number");
    const auto dataset = io::load_dataset(opts.dataset);
    const auto docs = index_documents(dataset);

    struct DocResult {
        std::vector<io::ScoreRecord> records;
        std::vector<AlignmentWarning> warnings;
        std::vector<std::size_t> ccp_fallback;
    };
    const FocusConfig focus{opts.gamma};
    const auto sweep = sweep_traces<DocResult>(
        opts.traces, docs, opts.workers,
        [&](const AnnotatedDocument& doc, const GenerationTrace& trace, std::size_t line) {
            check_trace(trace, opts.traces, line);
            DocResult r;
            const auto alignment = align(doc, trace);
            r.warnings = alignment.warnings;
            for (Method m : opts.methods) {
                CcpDiagnostics diag;
                TokenScores tokens;
                try {
                    tokens = score(m, trace, focus, &diag);
                } catch (const ScorerError& e) {
                    throw ScorerError(fmt::format("trace '{}': {}", doc.doc_id, e.what()));
                }
                if (m == Method::ccp) r.ccp_fallback = std::move(diag.fallback_tokens);
                EntityScores entities = aggregate(tokens, alignment);
                r.records.push_back({std::move(tokens), std::move(entities)});
            }
            return r;
        });

    ensure_directory(opts.out);
    for (std::size_t k = 0; k < opts.methods.size(); ++k) {
        std::vector<io::ScoreRecord> records;
        records.reserve(sweep.results.size());
        for (const auto& [id, r] : sweep.results) records.push_back(r.records[k]);
        const fs::path path = opts.out / fmt::format("{}.scores.jsonl", to_string(opts.methods[k]));
        io::store_scores(path, records);
        out << fmt::format("wrote {} ({} documents)\n", path.string(), records.size());
    }

    Json diag;
    Json methods = Json::array();
    for (Method m : opts.methods) methods.push_back(std::string(to_string(m)));
    diag["methods"] = std::move(methods);
    diag["gamma"] = opts.gamma;
    Json warnings = Json::array();
    Json fallback = Json::array();
    std::size_t n_fallback = 0;
    for (const auto& [id, r] : sweep.results) {
        for (const auto& w : r.warnings) {
            warnings.push_back({{"doc_id", id},
                                {"entity_index", w.entity_index},
                                {"entity_id", w.entity_id},
                                {"message", w.message}});
        }
        if (!r.ccp_fallback.empty()) {
            fallback.push_back({{"doc_id", id}, {"tokens", r.ccp_fallback}});
            n_fallback += r.ccp_fallback.size();
        }
    }
    const std::size_t n_warnings = warnings.size();
    diag["alignment_warnings"] = std::move(warnings);
    diag["ccp_fallback_tokens"] = std::move(fallback);
    diag["unused_traces"] = sweep.unused;
    io::write_file(opts.out / "score_diagnostics.json", diag.dump(2) + "\n");

    if (n_fallback > 0) {
        out << fmt::format("ccp fell back to likelihood on {} token(s)\n", n_fallback);
    }
    if (n_warnings > 0) out << fmt::format("{} alignment warning(s)\n", n_warnings);
    if (!sweep.unused.empty()) {
        out << fmt::format("{} trace(s) without a dataset document\n", sweep.unused.size());
    }
    return (n_warnings > 0 || !sweep.unused.empty()) ? kWarnings : kSuccess;
}

// ---- evaluate ---------------------------------------------------------------

int run_evaluate(const EvaluateOptions& opts, std::ostream& out) {
    if (opts.scores.empty()) throw UsageError("no score files given");
    const auto dataset = io::load_dataset(opts.dataset);

    std::vector<EvaluationReport> reports;
    std::set<Method> methods;
    for (const auto& path : opts.scores) {
        const auto records = io::load_scores(path);
        if (records.empty()) throw InputMismatchError(path.string() + ": no score records");
        const Method m = records.front().tokens.method;
        if (!methods.insert(m).second) {
            throw UsageError(fmt::format("method '{}' given more than once", to_string(m)));
        }
        std::vector<EntityScores> entities;
        entities.reserve(records.size());
        for (const auto& r : records) entities.push_back(r.entities);
        try {
            reports.push_back(evaluate(m, dataset, entities, opts.by_rate));
        } catch (const InputMismatchError& e) {
            throw InputMismatchError(path.string() + ": " + e.what());
        }
    }

    ensure_directory(opts.out);
    io::store_report(opts.out / "evaluation.json", reports);

    bool warned = false;
    out << fmt::format("{:<12}{:>8}{:>8}{:>8}{:>8}{:>8}\n", "method", "AUROC", "AUPRC", "F1opt",
                       "Popt", "Ropt");
    const auto row = [&](const std::string& name, const MetricSet& m) {
        out << fmt::format("{:<12}{:>8.4f}{:>8.4f}{:>8.4f}{:>8.4f}{:>8.4f}\n", name, m.auroc,
                           m.auprc, m.optimum.f1, m.optimum.precision, m.optimum.recall);
    };
    for (const auto& r : reports) {
        row(std::string(to_string(r.method)), r.overall);
        for (const auto& [g, m] : r.per_group) {
            const std::string name = fmt::format("  {}", to_string(g));
            if (m) {
                row(name, *m);
            } else {
                out << fmt::format("{:<12}{:>8}\n", name, "n/a");
            }
        }
        for (const auto& w : r.warnings) {
            out << "warning: " << w << "\n";
            warned = true;
        }
    }
    out << fmt::format("wrote {}\n", (opts.out / "evaluation.json").string());
    return warned ? kWarnings : kSuccess;
}

// ---- analyze ----------------------------------------------------------------

int run_analyze(const AnalyzeOptions& opts, std::ostream& out) {
    std::set<std::string> tables;
    for (const auto& key : opts.breakdown) {
        if (key != "pos" && key != "ner" && key != "position") {
            throw UsageError(fmt::format("unknown breakdown '{}' (expected pos, ner or position)", key));
        }
        tables.insert(key);
    }

    const auto dataset = io::load_dataset(opts.dataset);
    const auto docs = index_documents(dataset);
    const auto scores = index_scores(io::load_scores(opts.scores), opts.scores);
    if (scores.empty()) throw InputMismatchError(opts.scores.string() + ": no score records");
    const Method method = scores.begin()->second.tokens.method;

    std::vector<EntityScores> entity_scores;
    for (const auto& [id, r] : scores) entity_scores.push_back(r.entities);
    const EvaluationReport overall = evaluate(method, dataset, entity_scores, false);
    const double threshold = opts.threshold.value_or(overall.overall.optimum.threshold);

    struct DocResult {
        std::vector<EntityObservation> observations;
        TagStats stats;
    };
    const auto sweep = sweep_traces<DocResult>(
        opts.traces, docs, opts.workers,
        [&](const AnnotatedDocument& doc, const GenerationTrace& trace, std::size_t line) {
            check_trace(trace, opts.traces, line);
            const auto alignment = align(doc, trace);
            const auto& record = scores.at(doc.doc_id);
            if (record.entities.token_ranges != alignment.ranges) {
                throw InputMismatchError(fmt::format(
                    "document '{}': score file token ranges do not match the trace alignment",
                    doc.doc_id));
            }
            return DocResult{observe_entities(doc, trace, alignment, record.entities),
                             tag_stats(doc, trace, alignment)};
        });

    std::vector<EntityObservation> observations;
    AnalysisReport report;
    report.method = method;
    report.threshold = threshold;
    for (const auto& [id, r] : sweep.results) {
        observations.insert(observations.end(), r.observations.begin(), r.observations.end());
        report.base_rates += r.stats;
    }
    report.errors = error_breakdown(observations, threshold);
    report.rate_histogram = rate_histogram(dataset);
    if (!tables.count("pos")) report.errors.pos.clear();
    if (!tables.count("ner")) report.errors.ner.clear();
    if (!tables.count("position")) report.errors.position.clear();

    ensure_directory(opts.out);
    io::write_file(opts.out / "analysis.json", io::analysis_to_json(report));
    io::write_file(opts.out / "breakdown.csv", io::breakdown_to_csv(report.errors));
    io::write_file(opts.out / "tag_stats.csv", io::tag_stats_to_csv(report.base_rates));

    const std::string name(to_string(method));
    if (tables.count("pos")) {
        io::write_file(opts.out / "breakdown_pos.svg",
                       render_breakdown_svg(name + ": FPR/FNR by POS tag", report.errors.pos,
                                            pos_keys()));
    }
    if (tables.count("ner")) {
        io::write_file(opts.out / "breakdown_ner.svg",
                       render_breakdown_svg(name + ": FPR/FNR by NER tag", report.errors.ner,
                                            ner_keys()));
    }
    if (tables.count("position")) {
        io::write_file(opts.out / "breakdown_position.svg",
                       render_breakdown_svg(name + ": FPR/FNR by sentence position",
                                            report.errors.position, position_keys()));
    }

    std::size_t rendered = 0;
    if (opts.render > 0) {
        const fs::path dir = opts.out / "samples";
        ensure_directory(dir);
        for (const auto& [id, r] : scores) {
            if (rendered == opts.render) break;
            const auto it = docs.find(id);
            if (it == docs.end()) continue;
            io::write_file(dir / fmt::format("{:04}_{}.html", rendered, file_safe(id)),
                           render_sample_html(*it->second, r.entities));
            ++rendered;
        }
    }

    out << fmt::format("method {}  threshold {}\n", name, threshold);
    for (const auto& [label, table] :
         {std::pair{"position", &report.errors.position}, std::pair{"ner", &report.errors.ner},
          std::pair{"pos", &report.errors.pos}}) {
        for (const auto& [key, cell] : *table) {
            const auto show = [](const std::optional<double>& v) {
                return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
            };
            out << fmt::format("{:<9}{:<13} FPR {:>7}  FNR {:>7}\n", label, key, show(cell.fpr()),
                               show(cell.fnr()));
        }
    }
    if (rendered > 0) out << fmt::format("rendered {} sample(s)\n", rendered);
    out << fmt::format("wrote {}\n", (opts.out / "analysis.json").string());
    return sweep.unused.empty() ? kSuccess : kWarnings;
}

// ---- correlate --------------------------------------------------------------

int run_correlate(const CorrelateOptions& opts, std::ostream& out) {
    const auto a = index_scores(io::load_scores(opts.a), opts.a);
    const auto b = index_scores(io::load_scores(opts.b), opts.b);
    if (a.size() != b.size() ||
        !std::equal(a.begin(), a.end(), b.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
        throw InputMismatchError(fmt::format("{} and {} do not cover the same documents",
                                             opts.a.string(), opts.b.string()));
    }

    std::vector<double> xs;
    std::vector<double> ys;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        const bool token = opts.level == CorrelationLevel::token;
        const auto& va = token ? ia->second.tokens.values : ia->second.entities.values;
        const auto& vb = token ? ib->second.tokens.values : ib->second.entities.values;
        if (va.size() != vb.size()) {
            if (token) {
                throw InputMismatchError(fmt::format(
                    "document '{}': {} vs {} tokens; the tokenizations differ, use --level entity",
                    ia->first, va.size(), vb.size()));
            }
            throw InputMismatchError(fmt::format("document '{}': {} vs {} entities", ia->first,
                                                 va.size(), vb.size()));
        }
        xs.insert(xs.end(), va.begin(), va.end());
        ys.insert(ys.end(), vb.begin(), vb.end());
    }
    double r = 0.0;
    try {
        r = pearson(xs, ys);
    } catch (const MetricError& e) {
        throw InputMismatchError(e.what());
    }
    out << fmt::format("pearson_r {}\npairs {}\n", r, xs.size());
    return kSuccess;
}

// ---- import -----------------------------------------------------------------

int run_import(const ImportOptions& opts, std::ostream& out) {
    const auto report = io::import_published(opts.input, opts.output);
    out << fmt::format("imported {} documents, {} entities into {}\n", report.documents,
                       report.entities, opts.output.string());
    for (const auto& f : report.flagged) out << "check: " << f << "\n";
    return report.flagged.empty() ? kSuccess : kWarnings;
}

int run_guarded(const std::function<int()>& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kInputFault;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kInputFault;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternalFault;
    } catch (...) {
        err << "internal error: unknown exception\n";
        return kInternalFault;
    }
}

}  // namespace halluscore::cli
