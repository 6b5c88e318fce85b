#include <fmt/format.h>

#include "halluscore/error.hpp"
#include "halluscore/io.hpp"
#include "json_util.hpp"

namespace halluscore::io {

using detail::Json;
using detail::SchemaError;

std::string serialize_scores(const ScoreRecord& record) {
    Json ranges = Json::array();
    for (const auto& r : record.entities.token_ranges) ranges.push_back({r.first, r.last});
    Json j;
    j["doc_id"] = record.tokens.doc_id;
    j["method"] = std::string(to_string(record.tokens.method));
    j["token_values"] = record.tokens.values;
    j["entity_values"] = record.entities.values;
    j["token_ranges"] = std::move(ranges);
    return j.dump();
}

ScoreRecord parse_scores(std::string_view line, const std::string& path,
                         std::size_t line_number) {
    return detail::decode_line(line, path, line_number, [](const Json& j) {
        ScoreRecord r;
        r.tokens.doc_id = detail::get_string(j, "doc_id");
        const std::string method = detail::get_string(j, "method");
        const auto m = parse_method(method);
        if (!m) throw SchemaError("unknown method '" + method + "'");
        r.tokens.method = *m;
        r.entities.doc_id = r.tokens.doc_id;
        r.entities.method = *m;

        const auto read_values = [](const Json& arr, std::string_view name) {
            std::vector<double> out;
            out.reserve(arr.size());
            for (const Json& v : arr) {
                if (!v.is_number()) {
                    throw SchemaError(fmt::format("field '{}' must hold numbers only", name));
                }
                out.push_back(v.get<double>());
            }
            return out;
        };
        r.tokens.values = read_values(detail::get_array(j, "token_values"), "token_values");
        r.entities.values = read_values(detail::get_array(j, "entity_values"), "entity_values");

        for (const Json& pair : detail::get_array(j, "token_ranges")) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
                !pair[1].is_number_unsigned()) {
                throw SchemaError("token_ranges entries must be [first, last] index pairs");
            }
            const TokenRange range{pair[0].get<std::size_t>(), pair[1].get<std::size_t>()};
            if (range.first > range.last || range.last >= r.tokens.values.size()) {
                throw SchemaError(fmt::format("token range [{}, {}] outside {} token values",
                                              range.first, range.last, r.tokens.values.size()));
            }
            r.entities.token_ranges.push_back(range);
        }
        if (r.entities.token_ranges.size() != r.entities.values.size()) {
            throw SchemaError(fmt::format("{} entity values but {} token ranges",
                                          r.entities.values.size(),
                                          r.entities.token_ranges.size()));
        }
        return r;
    });
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
    LineReader reader(path);
    std::vector<ScoreRecord> out;
    while (auto line = reader.next()) {
        out.push_back(parse_scores(*line, reader.path(), reader.line_number()));
        if (out.size() > 1 && out.back().tokens.method != out.front().tokens.method) {
            throw ParseError(reader.path(), reader.line_number(),
                             "score file mixes methods");
        }
    }
    return out;
}

void store_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
    LineWriter writer(path);
    for (const auto& r : records) writer.write_line(serialize_scores(r));
    writer.close();
}

}  // namespace halluscore::io
