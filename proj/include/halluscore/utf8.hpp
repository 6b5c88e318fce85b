#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halluscore::utf8 {

/// Byte offset of every scalar value in a UTF-8 string, plus one trailing
/// entry equal to the byte length. Lets callers slice by scalar offsets.
class ScalarIndex {
public:
    /// Returns std::nullopt when `text` is not valid UTF-8; `error_byte`
    /// receives the offending byte offset.
    static std::optional<ScalarIndex> build(std::string_view text,
                                            std::size_t* error_byte = nullptr);

    std::size_t length() const { return offsets_.size() - 1; }
    std::size_t byte_offset(std::size_t scalar) const { return offsets_.at(scalar); }

    /// Index of the first scalar starting at or after `byte`.
    std::size_t scalar_at_byte(std::size_t byte) const;

    /// Substring covering scalars [start, end). Both bounds must be <= length().
    std::string_view slice(std::string_view text, std::size_t start,
                           std::size_t end) const;

private:
    std::vector<std::size_t> offsets_;
};

/// Number of scalar values, or std::nullopt for invalid UTF-8.
std::optional<std::size_t> scalar_length(std::string_view text);

/// Scalar offset of the first position where `a` and `b` differ, or
/// std::nullopt when they are equal. Invalid sequences count one scalar per
/// byte.
std::optional<std::size_t> first_difference(std::string_view a, std::string_view b);

}  // namespace halluscore::utf8
