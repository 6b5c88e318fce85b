#include <cmath>

#include <fmt/format.h>

#include "halluscore/io.hpp"
#include "json_util.hpp"

namespace halluscore::io {

using detail::Json;

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_number(const std::optional<double>& v) {
    return v ? Json(*v) : Json(nullptr);
}

Json metric_set_json(const MetricSet& m) {
    Json j;
    j["auroc"] = m.auroc;
    j["auprc"] = m.auprc;
    j["f1_opt"] = m.optimum.f1;
    j["precision_opt"] = m.optimum.precision;
    j["recall_opt"] = m.optimum.recall;
    j["opt_threshold"] = number_or_null(m.optimum.threshold);
    j["n_positive"] = m.n_positive;
    j["n_negative"] = m.n_negative;
    return j;
}

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{}", v) : ""; }

std::string csv_optional(const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string();
}

std::string metric_csv_fields(const MetricSet& m) {
    return fmt::format("{},{},{},{},{},{},{},{}", m.n_positive, m.n_negative, m.auroc, m.auprc,
                       m.optimum.f1, m.optimum.precision, m.optimum.recall,
                       csv_number(m.optimum.threshold));
}

Json cell_json(const ConfusionCell& c) {
    return Json{{"tp", c.tp},
                {"fp", c.fp},
                {"tn", c.tn},
                {"fn", c.fn},
                {"fpr", optional_number(c.fpr())},
                {"fnr", optional_number(c.fnr())}};
}

Json table_json(const ConfusionTable& table, const std::vector<std::string>& order) {
    Json j = Json::object();
    for (const auto& key : order) {
        if (const auto it = table.find(key); it != table.end()) j[key] = cell_json(it->second);
    }
    return j;
}

Json counts_json(const std::map<std::string, TagCount>& counts,
                 const std::vector<std::string>& order, std::size_t total) {
    Json j = Json::object();
    for (const auto& key : order) {
        const auto it = counts.find(key);
        if (it == counts.end()) continue;
        j[key] = Json{{"words", it->second.words},
                      {"hallucinated", it->second.hallucinated},
                      {"share", TagStats::share(it->second, total)},
                      {"rate", TagStats::rate(it->second)}};
    }
    return j;
}

}  // namespace

std::string report_to_json(std::span<const EvaluationReport> reports) {
    Json all = Json::array();
    for (const auto& r : reports) {
        Json j;
        j["method"] = std::string(to_string(r.method));
        const Json overall = metric_set_json(r.overall);
        for (const auto& [k, v] : overall.items()) j[k] = v;
        if (!r.per_group.empty()) {
            Json groups = Json::object();
            for (RateGroup g : kAllRateGroups) {
                const auto it = r.per_group.find(g);
                Json entry = (it != r.per_group.end() && it->second)
                                 ? metric_set_json(*it->second)
                                 : Json::object();
                const auto docs = r.group_documents.find(g);
                entry["documents"] = docs != r.group_documents.end() ? docs->second : 0;
                entry["defined"] = it != r.per_group.end() && it->second.has_value();
                groups[std::string(to_string(g))] = std::move(entry);
            }
            j["per_group"] = std::move(groups);
        }
        j["warnings"] = r.warnings;
        all.push_back(std::move(j));
    }
    return Json{{"reports", std::move(all)}}.dump(2) + "\n";
}

std::string report_to_csv(std::span<const EvaluationReport> reports) {
    std::string out =
        "method,group,documents,n_positive,n_negative,auroc,auprc,f1_opt,precision_opt,"
        "recall_opt,opt_threshold\n";
    for (const auto& r : reports) {
        out += fmt::format("{},all,,{}\n", to_string(r.method), metric_csv_fields(r.overall));
        for (const auto& [g, m] : r.per_group) {
            const auto docs = r.group_documents.find(g);
            const std::size_t n_docs = docs != r.group_documents.end() ? docs->second : 0;
            if (m) {
                out += fmt::format("{},{},{},{}\n", to_string(r.method), to_string(g), n_docs,
                                   metric_csv_fields(*m));
            } else {
                out += fmt::format("{},{},{},,,,,,,,\n", to_string(r.method), to_string(g), n_docs);
            }
        }
    }
    return out;
}

void store_report(const std::filesystem::path& json_path,
                  std::span<const EvaluationReport> reports) {
    write_file(json_path, report_to_json(reports));
    auto csv_path = json_path;
    csv_path.replace_extension(".csv");
    write_file(csv_path, report_to_csv(reports));
}

std::string analysis_to_json(const AnalysisReport& report) {
    Json j;
    j["method"] = std::string(to_string(report.method));
    j["threshold"] = number_or_null(report.threshold);
    j["word_weighting"] = report.word_weighting;
    j["breakdown"] = Json{{"pos", table_json(report.errors.pos, pos_keys())},
                          {"ner", table_json(report.errors.ner, ner_keys())},
                          {"position", table_json(report.errors.position, position_keys())}};
    const auto& s = report.base_rates;
    j["tag_stats"] = Json{{"total_words", s.total_words},
                          {"pos", counts_json(s.pos, pos_keys(), s.total_words)},
                          {"ner", counts_json(s.ner, ner_keys(), s.total_words)},
                          {"position", counts_json(s.position, position_keys(), s.total_words)}};
    j["rate_histogram"] = report.rate_histogram;
    return j.dump(2) + "\n";
}

std::string breakdown_to_csv(const ErrorBreakdown& breakdown) {
    std::string out = "table,key,tp,fp,tn,fn,fpr,fnr\n";
    const auto emit = [&](std::string_view name, const ConfusionTable& table,
                          const std::vector<std::string>& order) {
        for (const auto& key : order) {
            const auto it = table.find(key);
            if (it == table.end()) continue;
            const ConfusionCell& c = it->second;
            out += fmt::format("{},{},{},{},{},{},{},{}\n", name, key, c.tp, c.fp, c.tn, c.fn,
                               csv_optional(c.fpr()), csv_optional(c.fnr()));
        }
    };
    emit("pos", breakdown.pos, pos_keys());
    emit("ner", breakdown.ner, ner_keys());
    emit("position", breakdown.position, position_keys());
    return out;
}

std::string tag_stats_to_csv(const TagStats& stats) {
    std::string out = "table,key,words,hallucinated,share,rate\n";
    const auto emit = [&](std::string_view name, const std::map<std::string, TagCount>& counts,
                          const std::vector<std::string>& order) {
        for (const auto& key : order) {
            const auto it = counts.find(key);
            if (it == counts.end()) continue;
            out += fmt::format("{},{},{},{},{},{}\n", name, key, it->second.words,
                               it->second.hallucinated,
                               TagStats::share(it->second, stats.total_words),
                               TagStats::rate(it->second));
        }
    };
    emit("pos", stats.pos, pos_keys());
    emit("ner", stats.ner, ner_keys());
    emit("position", stats.position, position_keys());
    return out;
}

std::string stats_to_json(const DatasetStats& stats) {
    Json groups = Json::object();
    for (RateGroup g : kAllRateGroups) {
        const auto it = stats.group_sizes.find(g);
        groups[std::string(to_string(g))] = it != stats.group_sizes.end() ? it->second : 0;
    }
    Json j;
    j["documents"] = stats.documents;
    j["entities"] = stats.entities;
    j["unique_entities"] = stats.unique_entities;
    j["hallucinated_entities"] = stats.hallucinated;
    j["hallucination_rate"] = stats.hallucination_rate;
    j["mean_words_per_entity"] = stats.mean_words_per_entity;
    j["mean_entities_per_document"] = stats.mean_entities_per_document;
    j["rate_histogram"] = stats.rate_histogram;
    j["rate_groups"] = std::move(groups);
    return j.dump(2) + "\n";
}

}  // namespace halluscore::io
