#include <fstream>
#include <sstream>

#include <zlib.h>

#include "halluscore/error.hpp"
#include "halluscore/io.hpp"

namespace halluscore::io {

namespace {

bool has_gz_extension(const std::filesystem::path& p) { return p.extension() == ".gz"; }

}  // namespace

struct LineReader::Impl {
    gzFile file = nullptr;
    bool eof = false;
};

LineReader::LineReader(std::filesystem::path path)
    : impl_(std::make_unique<Impl>()), path_str_(path.string()) {
    // gzopen reads uncompressed files transparently.
    impl_->file = gzopen(path_str_.c_str(), "rb");
    if (impl_->file == nullptr) throw ParseError(path_str_, 0, "cannot open file");
    gzbuffer(impl_->file, 1 << 17);
}

LineReader::~LineReader() {
    if (impl_ && impl_->file) gzclose(impl_->file);
}

std::optional<std::string> LineReader::next() {
    std::string line;
    char buf[1 << 14];
    while (!impl_->eof) {
        line.clear();
        bool terminated = false;
        while (char* got = gzgets(impl_->file, buf, sizeof(buf))) {
            line.append(got);
            if (!line.empty() && line.back() == '\n') {
                terminated = true;
                break;
            }
        }
        if (!terminated) {
            int err = Z_OK;
            const char* msg = gzerror(impl_->file, &err);
            if (err != Z_OK && err != Z_BUF_ERROR) {
                throw ParseError(path_str_, line_ + 1, std::string("read error: ") + msg);
            }
            impl_->eof = true;
            if (line.empty()) return std::nullopt;
            ++line_;
            throw ParseError(path_str_, line_, "truncated record: final line has no newline");
        }
        ++line_;
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        return line;
    }
    return std::nullopt;
}

struct LineWriter::Impl {
    gzFile file = nullptr;
};

LineWriter::LineWriter(std::filesystem::path path)
    : impl_(std::make_unique<Impl>()), path_str_(path.string()) {
    const char* mode = has_gz_extension(path) ? "wb6" : "wbT";
    impl_->file = gzopen(path_str_.c_str(), mode);
    if (impl_->file == nullptr) throw Error(path_str_ + ": cannot open for writing");
}

LineWriter::~LineWriter() {
    try {
        close();
    } catch (...) {
    }
}

void LineWriter::write_line(std::string_view line) {
    if (!impl_->file) throw Error(path_str_ + ": write after close");
    if (!line.empty() &&
        gzwrite(impl_->file, line.data(), static_cast<unsigned>(line.size())) <= 0) {
        throw Error(path_str_ + ": write failed");
    }
    if (gzputc(impl_->file, '\n') != '\n') throw Error(path_str_ + ": write failed");
}

void LineWriter::close() {
    if (!impl_ || !impl_->file) return;
    const int rc = gzclose(impl_->file);
    impl_->file = nullptr;
    if (rc != Z_OK) throw Error(path_str_ + ": close failed");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(path.string() + ": write failed");
}

}  // namespace halluscore::io
