#pragma once

// Line-oriented persistence for datasets, trace bundles, score files and
// reports. Every file is UTF-8 JSON Lines; paths ending in ".gz" are read and
// written gzip-compressed. Every record must end with a newline.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halluscore/analysis.hpp"
#include "halluscore/metrics.hpp"
#include "halluscore/types.hpp"

namespace halluscore::io {

/// Sequential line reader over a plain or gzip file. Tracks 1-based line
/// numbers and rejects a final record without a terminating newline.
class LineReader {
public:
    explicit LineReader(std::filesystem::path path);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    /// Next non-empty line without its newline, or std::nullopt at end of file.
    std::optional<std::string> next();
    std::size_t line_number() const { return line_; }
    const std::string& path() const { return path_str_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_str_;
    std::size_t line_ = 0;
};

/// Sequential writer; compresses when the path ends in ".gz".
class LineWriter {
public:
    explicit LineWriter(std::filesystem::path path);
    ~LineWriter();
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void write_line(std::string_view line);
    /// Flushes and closes; throws on I/O failure. Called by the destructor
    /// (which swallows errors) when not called explicitly.
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_str_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// ---- datasets ---------------------------------------------------------------

/// Maps an upstream fact label onto the binary entity label: Supported stays
/// supported; Not-supported and Irrelevant both become hallucinated. Also
/// accepts the canonical names. Case-insensitive.
std::optional<Label> merge_source_label(std::string_view label);

std::string serialize_document(const AnnotatedDocument& doc);
AnnotatedDocument parse_document(std::string_view line, const std::string& path,
                                 std::size_t line_number);

/// Loads and validates a canonical dataset. Throws ParseError (with path and
/// line) on schema violations, invalid spans or duplicate doc_ids.
std::vector<AnnotatedDocument> load_dataset(const std::filesystem::path& path);
void store_dataset(const std::filesystem::path& path, std::span<const AnnotatedDocument> docs);

struct DatasetStats {
    std::size_t documents = 0;
    std::size_t entities = 0;
    std::size_t unique_entities = 0;
    std::size_t hallucinated = 0;
    double mean_words_per_entity = 0.0;
    double mean_entities_per_document = 0.0;
    double hallucination_rate = 0.0;
    std::array<std::size_t, 20> rate_histogram{};
    std::map<RateGroup, std::size_t> group_sizes;
};

/// Whitespace-separated word count.
std::size_t count_words(std::string_view text);

DatasetStats dataset_stats(std::span<const AnnotatedDocument> dataset);

struct ImportReport {
    std::size_t documents = 0;
    std::size_t entities = 0;
    /// Entity matches worth a manual look (surface found only inside a longer word).
    std::vector<std::string> flagged;
};

/// Converts a published-style dataset (JSON Lines or a JSON array) into the
/// canonical format. Entities without offsets are located by left-to-right,
/// non-overlapping search, preferring whole-word occurrences.
ImportReport import_published(const std::filesystem::path& input,
                              const std::filesystem::path& output);

// ---- trace bundles ----------------------------------------------------------

std::string serialize_trace(const GenerationTrace& trace);
GenerationTrace parse_trace(std::string_view line, const std::string& path,
                            std::size_t line_number);

/// Streams one GenerationTrace per line. Only the schema is checked here;
/// invariants are left to validate_trace and the scorers.
class TraceReader {
public:
    explicit TraceReader(std::filesystem::path path) : reader_(std::move(path)) {}
    std::optional<GenerationTrace> next();
    std::size_t line_number() const { return reader_.line_number(); }

private:
    LineReader reader_;
};

std::vector<GenerationTrace> load_traces(const std::filesystem::path& path);
void store_traces(const std::filesystem::path& path, std::span<const GenerationTrace> traces);

/// Attention rows travel as base64 of little-endian float32 values.
std::string encode_attention_row(std::span<const float> row);
/// std::nullopt for malformed base64 or a byte count that is not a whole
/// number of floats.
std::optional<std::vector<float>> decode_attention_row(std::string_view encoded);

// ---- score files ------------------------------------------------------------

/// Token and entity scores of one document under one method.
struct ScoreRecord {
    TokenScores tokens;
    EntityScores entities;

    bool operator==(const ScoreRecord&) const = default;
};

std::string serialize_scores(const ScoreRecord& record);
ScoreRecord parse_scores(std::string_view line, const std::string& path,
                         std::size_t line_number);
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);
void store_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);

// ---- reports ----------------------------------------------------------------

std::string report_to_json(std::span<const EvaluationReport> reports);
std::string report_to_csv(std::span<const EvaluationReport> reports);
void store_report(const std::filesystem::path& json_path,
                  std::span<const EvaluationReport> reports);

std::string analysis_to_json(const AnalysisReport& report);
/// CSV rows: table,key,tp,fp,tn,fn,fpr,fnr.
std::string breakdown_to_csv(const ErrorBreakdown& breakdown);
/// CSV rows: table,key,words,hallucinated,share,rate.
std::string tag_stats_to_csv(const TagStats& stats);

std::string stats_to_json(const DatasetStats& stats);

}  // namespace halluscore::io
