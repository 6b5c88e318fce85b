#include "halluscore/utf8.hpp"

#include <algorithm>

namespace halluscore::utf8 {

namespace {

// Length of the well-formed sequence starting at `pos`, or 0 if ill-formed.
std::size_t sequence_length(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return 1;

    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return 0;
    }
    if (pos + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[pos + k]);
        if ((b & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLength[len]) return 0;
    if (cp >= 0xD800 && cp <= 0xDFFF) return 0;
    if (cp > 0x10FFFF) return 0;
    return len;
}

}  // namespace

std::optional<ScalarIndex> ScalarIndex::build(std::string_view text,
                                              std::size_t* error_byte) {
    ScalarIndex index;
    index.offsets_.reserve(text.size() + 1);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t len = sequence_length(text, pos);
        if (len == 0) {
            if (error_byte) *error_byte = pos;
            return std::nullopt;
        }
        index.offsets_.push_back(pos);
        pos += len;
    }
    index.offsets_.push_back(text.size());
    return index;
}

std::size_t ScalarIndex::scalar_at_byte(std::size_t byte) const {
    return static_cast<std::size_t>(
        std::lower_bound(offsets_.begin(), offsets_.end(), byte) - offsets_.begin());
}

std::string_view ScalarIndex::slice(std::string_view text, std::size_t start,
                                    std::size_t end) const {
    const std::size_t b = byte_offset(start);
    const std::size_t e = byte_offset(end);
    return text.substr(b, e - b);
}

std::optional<std::size_t> scalar_length(std::string_view text) {
    auto index = ScalarIndex::build(text);
    if (!index) return std::nullopt;
    return index->length();
}

std::optional<std::size_t> first_difference(std::string_view a, std::string_view b) {
    std::size_t pos = 0;
    std::size_t scalar = 0;
    while (pos < a.size() && pos < b.size()) {
        std::size_t len = sequence_length(a, pos);
        if (len == 0) len = 1;
        if (a.substr(pos, len) != b.substr(pos, std::min(len, b.size() - pos))) {
            return scalar;
        }
        pos += len;
        ++scalar;
    }
    if (a.size() == b.size()) return std::nullopt;
    return scalar;
}

}  // namespace halluscore::utf8
