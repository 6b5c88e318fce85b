#include <bit>
#include <limits>
#include <cstring>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "halluscore/error.hpp"
#include "halluscore/io.hpp"
#include "json_util.hpp"

namespace halluscore::io {

using detail::Json;
using detail::SchemaError;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

Json token_to_json(const TokenRecord& t) {
    Json alts = Json::array();
    for (const auto& a : t.alternatives) {
        alts.push_back({{"surface", a.surface},
                        {"logprob", a.logprob},
                        {"nli_relation", std::string(to_string(a.nli_relation))},
                        {"is_realized", a.is_realized}});
    }
    Json j;
    j["text"] = t.text;
    j["char_start"] = t.char_start;
    j["char_end"] = t.char_end;
    j["logprob"] = t.logprob;
    j["entropy_nats"] = t.entropy_nats;
    j["alternatives"] = std::move(alts);
    j["relevance_weight"] = t.relevance_weight;
    j["adjusted_logprob"] = t.adjusted_logprob;
    j["adjusted_entropy_bits"] = t.adjusted_entropy_bits;
    j["is_keyword"] = t.is_keyword;
    j["pos_tag"] = std::string(to_string(t.pos_tag));
    j["ner_tag"] = t.ner_tag ? Json(std::string(to_string(*t.ner_tag))) : Json(nullptr);
    j["sentence_index"] = t.sentence_index;
    j["word_index_in_sentence"] = t.word_index_in_sentence;
    return j;
}

TokenRecord token_from_json(const Json& j, std::size_t i) {
    try {
        TokenRecord t;
        t.text = detail::get_string(j, "text");
        t.char_start = detail::get_index(j, "char_start");
        t.char_end = detail::get_index(j, "char_end");
        t.logprob = detail::get_number(j, "logprob");
        t.entropy_nats = detail::get_number(j, "entropy_nats");
        for (const Json& a : detail::get_array(j, "alternatives")) {
            Alternative alt;
            alt.surface = detail::get_string(a, "surface");
            alt.logprob = detail::get_number(a, "logprob");
            const std::string rel = detail::get_string(a, "nli_relation");
            const auto parsed = parse_nli_relation(rel);
            if (!parsed) throw SchemaError("unknown nli_relation '" + rel + "'");
            alt.nli_relation = *parsed;
            alt.is_realized = detail::get_bool(a, "is_realized");
            t.alternatives.push_back(std::move(alt));
        }
        t.relevance_weight = detail::get_number(j, "relevance_weight");
        t.adjusted_logprob = detail::get_number(j, "adjusted_logprob");
        t.adjusted_entropy_bits = detail::get_number(j, "adjusted_entropy_bits");
        t.is_keyword = detail::get_bool(j, "is_keyword");
        const std::string pos = detail::get_string(j, "pos_tag");
        const auto pos_tag = parse_pos_tag(pos);
        if (!pos_tag) throw SchemaError("unknown pos_tag '" + pos + "'");
        t.pos_tag = *pos_tag;
        const Json& ner = detail::field(j, "ner_tag");
        if (!ner.is_null()) {
            if (!ner.is_string()) throw SchemaError("field 'ner_tag' must be a string or null");
            const auto tag = parse_ner_tag(ner.get<std::string>());
            if (!tag) throw SchemaError("unknown ner_tag '" + ner.get<std::string>() + "'");
            t.ner_tag = *tag;
        }
        t.sentence_index = detail::get_index(j, "sentence_index");
        t.word_index_in_sentence = detail::get_index(j, "word_index_in_sentence");
        return t;
    } catch (const SchemaError& e) {
        throw SchemaError(fmt::format("token {}: {}", i, e.what()));
    }
}

}  // namespace

std::string encode_attention_row(std::span<const float> row) {
    if (row.empty()) return {};
    std::vector<unsigned char> bytes(row.size() * 4);
    for (std::size_t i = 0; i < row.size(); ++i) {
        const std::uint32_t v = to_little_endian(std::bit_cast<std::uint32_t>(row[i]));
        std::memcpy(bytes.data() + 4 * i, &v, 4);
    }
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::optional<std::vector<float>> decode_attention_row(std::string_view encoded) {
    if (encoded.empty()) return std::vector<float>{};
    if (encoded.size() % 4 != 0) return std::nullopt;
    std::vector<unsigned char> bytes(encoded.size() / 4 * 3);
    const int n = EVP_DecodeBlock(bytes.data(),
                                  reinterpret_cast<const unsigned char*>(encoded.data()),
                                  static_cast<int>(encoded.size()));
    if (n < 0) return std::nullopt;
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    std::size_t len = static_cast<std::size_t>(n);
    if (encoded.back() == '=') --len;
    if (encoded[encoded.size() - 2] == '=') --len;
    if (len % 4 != 0) return std::nullopt;

    std::vector<float> row(len / 4);
    for (std::size_t i = 0; i < row.size(); ++i) {
        std::uint32_t v = 0;
        std::memcpy(&v, bytes.data() + 4 * i, 4);
        row[i] = std::bit_cast<float>(to_little_endian(v));
    }
    return row;
}

std::string serialize_trace(const GenerationTrace& trace) {
    Json j;
    j["doc_id"] = trace.doc_id;
    j["generated_text"] = trace.generated_text;
    Json tokens = Json::array();
    for (const auto& t : trace.tokens) tokens.push_back(token_to_json(t));
    j["tokens"] = std::move(tokens);
    if (trace.attention) {
        Json rows = Json::array();
        for (const auto& row : *trace.attention) rows.push_back(encode_attention_row(row));
        j["attention"] = std::move(rows);
    }
    if (!trace.metadata_json.empty()) j["metadata"] = Json::parse(trace.metadata_json);
    return j.dump();
}

GenerationTrace parse_trace(std::string_view line, const std::string& path,
                            std::size_t line_number) {
    return detail::decode_line(line, path, line_number, [](const Json& j) {
        GenerationTrace t;
        t.doc_id = detail::get_string(j, "doc_id");
        t.generated_text = detail::get_string(j, "generated_text");
        const Json& tokens = detail::get_array(j, "tokens");
        t.tokens.reserve(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            t.tokens.push_back(token_from_json(tokens[i], i));
        }
        if (const auto it = j.find("attention"); it != j.end() && !it->is_null()) {
            if (!it->is_array()) throw SchemaError("field 'attention' must be an array");
            AttentionRows rows;
            rows.reserve(it->size());
            for (std::size_t i = 0; i < it->size(); ++i) {
                const Json& r = (*it)[i];
                if (!r.is_string()) {
                    throw SchemaError(fmt::format("attention row {}: must be a base64 string", i));
                }
                // Row length is checked by validation, not here.
                auto row = decode_attention_row(r.get_ref<const std::string&>());
                if (!row) throw SchemaError(fmt::format("attention row {}: invalid base64", i));
                rows.push_back(std::move(*row));
            }
            t.attention = std::move(rows);
        }
        if (const auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
            if (!it->is_object()) throw SchemaError("field 'metadata' must be an object");
            t.metadata_json = it->dump();
        }
        return t;
    });
}

std::optional<GenerationTrace> TraceReader::next() {
    auto line = reader_.next();
    if (!line) return std::nullopt;
    return parse_trace(*line, reader_.path(), reader_.line_number());
}

std::vector<GenerationTrace> load_traces(const std::filesystem::path& path) {
    TraceReader reader(path);
    std::vector<GenerationTrace> out;
    while (auto t = reader.next()) out.push_back(std::move(*t));
    return out;
}

void store_traces(const std::filesystem::path& path, std::span<const GenerationTrace> traces) {
    LineWriter writer(path);
    for (const auto& t : traces) writer.write_line(serialize_trace(t));
    writer.close();
}

}  // namespace halluscore::io
