#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <fmt/format.h>

#include "halluscore/error.hpp"
#include "halluscore/io.hpp"
#include "halluscore/utf8.hpp"
#include "json_util.hpp"

namespace halluscore::io {

using detail::Json;
using detail::SchemaError;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

const Json* first_present(const Json& obj, std::initializer_list<std::string_view> keys) {
    for (auto key : keys) {
        const auto it = obj.find(key);
        if (it != obj.end() && !it->is_null()) return &*it;
    }
    return nullptr;
}

std::optional<Label> label_from_json(const Json& v) {
    if (v.is_boolean()) return v.get<bool>() ? Label::supported : Label::hallucinated;
    if (v.is_string()) return merge_source_label(v.get<std::string>());
    return std::nullopt;
}

}  // namespace

std::optional<Label> merge_source_label(std::string_view label) {
    const std::string l = lower(label);
    if (l == "supported" || l == "true" || l == "s") return Label::supported;
    if (l == "hallucinated" || l == "not-supported" || l == "not_supported" ||
        l == "not supported" || l == "ns" || l == "irrelevant" || l == "ir" || l == "false") {
        return Label::hallucinated;
    }
    return std::nullopt;
}

std::string serialize_document(const AnnotatedDocument& doc) {
    Json j;
    j["doc_id"] = doc.doc_id;
    j["name"] = doc.name;
    j["text"] = doc.generated_text;
    Json ents = Json::array();
    for (const auto& e : doc.entities) {
        ents.push_back({{"surface", e.surface},
                        {"start", e.char_start},
                        {"end", e.char_end},
                        {"label", std::string(to_string(e.label))}});
    }
    j["entities"] = std::move(ents);
    return j.dump();
}

AnnotatedDocument parse_document(std::string_view line, const std::string& path,
                                 std::size_t line_number) {
    AnnotatedDocument doc = detail::decode_line(line, path, line_number, [](const Json& j) {
        AnnotatedDocument d;
        d.doc_id = detail::get_string(j, "doc_id");
        d.name = detail::get_string(j, "name");
        d.generated_text = detail::get_string(j, "text");
        const Json& ents = detail::get_array(j, "entities");
        for (std::size_t k = 0; k < ents.size(); ++k) {
            const Json& e = ents[k];
            Entity ent;
            ent.entity_id = static_cast<int>(k);
            ent.surface = detail::get_string(e, "surface");
            ent.char_start = detail::get_index(e, "start");
            ent.char_end = detail::get_index(e, "end");
            const std::string label = detail::get_string(e, "label");
            const auto parsed = merge_source_label(label);
            if (!parsed) throw SchemaError(fmt::format("entity {}: unknown label '{}'", k, label));
            ent.label = *parsed;
            d.entities.push_back(std::move(ent));
        }
        return d;
    });
    const auto violations = validate_document(doc);
    if (!violations.empty()) {
        throw ParseError(path, line_number,
                         fmt::format("document '{}': {}", doc.doc_id, violations.front()));
    }
    return doc;
}

std::vector<AnnotatedDocument> load_dataset(const std::filesystem::path& path) {
    LineReader reader(path);
    std::vector<AnnotatedDocument> docs;
    std::unordered_set<std::string> ids;
    while (auto line = reader.next()) {
        auto doc = parse_document(*line, reader.path(), reader.line_number());
        if (!ids.insert(doc.doc_id).second) {
            throw ParseError(reader.path(), reader.line_number(),
                             fmt::format("duplicate doc_id '{}'", doc.doc_id));
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void store_dataset(const std::filesystem::path& path, std::span<const AnnotatedDocument> docs) {
    LineWriter writer(path);
    for (const auto& d : docs) writer.write_line(serialize_document(d));
    writer.close();
}

std::size_t count_words(std::string_view text) {
    std::size_t words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

DatasetStats dataset_stats(std::span<const AnnotatedDocument> dataset) {
    DatasetStats s;
    s.documents = dataset.size();
    std::unordered_set<std::string_view> unique;
    std::size_t words = 0;
    for (const auto& doc : dataset) {
        s.entities += doc.entities.size();
        s.hallucinated += doc.hallucinated_count();
        for (const auto& e : doc.entities) {
            unique.insert(e.surface);
            words += count_words(e.surface);
        }
    }
    s.unique_entities = unique.size();
    if (s.entities > 0) {
        s.mean_words_per_entity = static_cast<double>(words) / static_cast<double>(s.entities);
        s.hallucination_rate =
            static_cast<double>(s.hallucinated) / static_cast<double>(s.entities);
    }
    if (s.documents > 0) {
        s.mean_entities_per_document =
            static_cast<double>(s.entities) / static_cast<double>(s.documents);
    }
    s.rate_histogram = rate_histogram(dataset);
    for (const auto& [group, ids] : group_by_rate(dataset)) s.group_sizes[group] = ids.size();
    return s;
}

namespace {

// One raw record of a published-style dataset, before offsets are resolved.
struct RawEntity {
    std::string surface;
    Label label;
    std::optional<std::size_t> start;
    std::optional<std::size_t> end;
};

AnnotatedDocument import_record(const Json& rec, std::size_t ordinal, ImportReport& report) {
    if (!rec.is_object()) throw SchemaError("record must be a JSON object");
    AnnotatedDocument doc;
    if (const Json* id = first_present(rec, {"doc_id", "id"})) {
        doc.doc_id = id->is_string() ? id->get<std::string>() : id->dump();
    } else {
        doc.doc_id = fmt::format("doc-{:04}", ordinal);
    }
    if (const Json* name = first_present(rec, {"name", "topic", "title"}); name && name->is_string()) {
        doc.name = name->get<std::string>();
    }
    const Json* text = first_present(rec, {"text", "generated_text", "generation", "output", "biography"});
    if (!text || !text->is_string()) throw SchemaError("record has no generated text field");
    doc.generated_text = text->get<std::string>();

    const Json* ents = first_present(rec, {"entities", "entity_labels", "annotations", "labels"});
    if (!ents || !ents->is_array()) throw SchemaError("record has no entity list");

    std::vector<RawEntity> raw;
    for (const Json& e : *ents) {
        RawEntity r{};
        const Json* surface = nullptr;
        const Json* label = nullptr;
        if (e.is_array() && e.size() >= 2) {
            surface = &e[0];
            label = &e[1];
        } else if (e.is_object()) {
            surface = first_present(e, {"surface", "entity", "text", "span"});
            label = first_present(e, {"label", "is_supported", "supported", "type"});
            if (const Json* s = first_present(e, {"start", "char_start"}); s && s->is_number_unsigned()) {
                r.start = s->get<std::size_t>();
            }
            if (const Json* s = first_present(e, {"end", "char_end"}); s && s->is_number_unsigned()) {
                r.end = s->get<std::size_t>();
            }
        }
        if (!surface || !surface->is_string() || !label) {
            throw SchemaError(fmt::format("document '{}': entity {} lacks surface or label",
                                          doc.doc_id, raw.size()));
        }
        const auto l = label_from_json(*label);
        if (!l) {
            throw SchemaError(fmt::format("document '{}': entity {} has unknown label {}",
                                          doc.doc_id, raw.size(), label->dump()));
        }
        r.surface = surface->get<std::string>();
        r.label = *l;
        raw.push_back(std::move(r));
    }

    const auto index = utf8::ScalarIndex::build(doc.generated_text);
    if (!index) throw SchemaError(fmt::format("document '{}': text is not valid UTF-8", doc.doc_id));

    const std::string& body = doc.generated_text;
    const auto word_char = [&](std::size_t byte) {
        const auto c = static_cast<unsigned char>(body[byte]);
        return std::isalnum(c) != 0 || c >= 0x80;
    };
    const auto whole_word = [&](std::size_t pos, std::size_t size) {
        const std::size_t end = pos + size;
        const bool left = pos == 0 || !word_char(pos - 1) || !word_char(pos);
        const bool right = end >= body.size() || !word_char(end) || !word_char(end - 1);
        return left && right;
    };

    std::size_t cursor = 0;  // byte offset
    std::vector<std::size_t> start_bytes;
    std::vector<bool> searched;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        Entity ent;
        ent.entity_id = static_cast<int>(k);
        ent.surface = raw[k].surface;
        ent.label = raw[k].label;
        if (raw[k].start && raw[k].end) {
            ent.char_start = *raw[k].start;
            ent.char_end = *raw[k].end;
            start_bytes.push_back(index->byte_offset(std::min(ent.char_start, index->length())));
            searched.push_back(false);
            cursor = index->byte_offset(std::min(ent.char_end, index->length()));
        } else {
            const std::size_t first =
                ent.surface.empty() ? std::string::npos : body.find(ent.surface, cursor);
            if (first == std::string::npos) {
                throw SchemaError(fmt::format(
                    "document '{}': entity {} '{}' not found after byte {}", doc.doc_id, k,
                    ent.surface, cursor));
            }
            // Prefer the first occurrence that is not part of a longer word.
            std::size_t at = first;
            while (at != std::string::npos && !whole_word(at, ent.surface.size())) {
                at = body.find(ent.surface, at + 1);
            }
            if (at == std::string::npos) {
                at = first;
                report.flagged.push_back(fmt::format(
                    "document '{}': entity {} '{}' only occurs inside a longer word (byte {})",
                    doc.doc_id, k, ent.surface, at));
            }
            const std::size_t end_byte = at + ent.surface.size();
            start_bytes.push_back(at);
            searched.push_back(true);
            ent.char_start = index->scalar_at_byte(at);
            ent.char_end = index->scalar_at_byte(end_byte);
            cursor = end_byte;
        }
        doc.entities.push_back(std::move(ent));
    }
    // A located surface that occurs again before the next entity could belong
    // to either occurrence.
    for (std::size_t k = 0; k < doc.entities.size(); ++k) {
        if (!searched[k]) continue;
        const auto& surface = doc.entities[k].surface;
        const std::size_t limit = k + 1 < start_bytes.size() ? start_bytes[k + 1] : body.size();
        std::size_t again = body.find(surface, start_bytes[k] + surface.size());
        while (again != std::string::npos && !whole_word(again, surface.size())) {
            again = body.find(surface, again + 1);
        }
        if (again != std::string::npos && again + surface.size() <= limit) {
            report.flagged.push_back(fmt::format(
                "document '{}': entity {} '{}' is ambiguous, it occurs again at character {}",
                doc.doc_id, k, surface, index->scalar_at_byte(again)));
        }
    }
    const auto violations = validate_document(doc);
    if (!violations.empty()) {
        throw SchemaError(fmt::format("document '{}': {}", doc.doc_id, violations.front()));
    }
    return doc;
}

}  // namespace

ImportReport import_published(const std::filesystem::path& input,
                              const std::filesystem::path& output) {
    ImportReport report;
    std::vector<AnnotatedDocument> docs;
    const std::string path = input.string();

    // A whole-file JSON array, or one record per line.
    const std::string content = read_file(input);
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
        try {
            const Json all = Json::parse(content);
            for (std::size_t i = 0; i < all.size(); ++i) {
                docs.push_back(import_record(all[i], i, report));
            }
        } catch (const Json::exception& e) {
            throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
        } catch (const SchemaError& e) {
            throw ParseError(path, 0, fmt::format("record {}: {}", docs.size(), e.what()));
        }
    } else {
        LineReader reader(input);
        while (auto line = reader.next()) {
            docs.push_back(detail::decode_line(*line, path, reader.line_number(), [&](const Json& j) {
                return import_record(j, docs.size(), report);
            }));
        }
    }

    std::unordered_set<std::string> ids;
    for (const auto& d : docs) {
        if (!ids.insert(d.doc_id).second) {
            throw ParseError(path, 0, fmt::format("duplicate doc_id '{}'", d.doc_id));
        }
        report.entities += d.entities.size();
    }
    report.documents = docs.size();
    store_dataset(output, docs);
    return report;
}

}  // namespace halluscore::io
