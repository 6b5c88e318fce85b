#pragma once

// Schema helpers shared by the JSON Lines codecs.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "halluscore/error.hpp"

namespace halluscore::io::detail {

using Json = nlohmann::ordered_json;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const Json& field(const Json& obj, std::string_view key) {
    if (!obj.is_object()) throw SchemaError("expected a JSON object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError("missing field '" + std::string(key) + "'");
    return *it;
}

inline std::string get_string(const Json& obj, std::string_view key) {
    const Json& v = field(obj, key);
    if (!v.is_string()) throw SchemaError("field '" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

inline double get_number(const Json& obj, std::string_view key) {
    const Json& v = field(obj, key);
    if (!v.is_number()) throw SchemaError("field '" + std::string(key) + "' must be a number");
    return v.get<double>();
}

inline std::size_t get_index(const Json& obj, std::string_view key) {
    const Json& v = field(obj, key);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
        return static_cast<std::size_t>(v.get<long long>());
    }
    throw SchemaError("field '" + std::string(key) + "' must be a non-negative integer");
}

inline bool get_bool(const Json& obj, std::string_view key) {
    const Json& v = field(obj, key);
    if (!v.is_boolean()) throw SchemaError("field '" + std::string(key) + "' must be a boolean");
    return v.get<bool>();
}

inline const Json& get_array(const Json& obj, std::string_view key) {
    const Json& v = field(obj, key);
    if (!v.is_array()) throw SchemaError("field '" + std::string(key) + "' must be an array");
    return v;
}

/// Parses one line and runs `fn` on it, turning JSON and schema faults into a
/// ParseError that names the file and line.
template <typename Fn>
auto decode_line(std::string_view line, const std::string& path, std::size_t line_number,
                 Fn&& fn) {
    try {
        const Json j = Json::parse(line);
        return fn(j);
    } catch (const Json::exception& e) {
        throw ParseError(path, line_number, std::string("invalid JSON: ") + e.what());
    } catch (const SchemaError& e) {
        throw ParseError(path, line_number, e.what());
    }
}

}  // namespace halluscore::io::detail
