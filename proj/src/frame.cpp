#include "vlp/frame.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "vlp/errors.hpp"

namespace vlp::render {

Frame::Frame(int width, int height, FrameMeta meta) : width_(width), height_(height), meta_(meta) {
    if (width < 0 || height < 0) throw std::invalid_argument("frame dimensions must be non-negative");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::string encode_pgm(const Frame& frame) {
    std::ostringstream out;
    out.precision(17);
    out << "P5\n# vlp exposure_us=" << frame.meta().exposure_us << " row_readout_us=" << frame.meta().row_readout_us
        << " iso_gain=" << frame.meta().iso_gain << "\n"
        << frame.width() << " " << frame.height() << "\n255\n";
    std::string s = out.str();
    s.append(reinterpret_cast<const char*>(frame.pixels().data()), frame.pixels().size());
    return s;
}

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    // Next whitespace-delimited token, collecting comment lines on the way.
    std::string_view token() {
        for (;;) {
            while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
            if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
                std::size_t end = bytes_.find('\n', pos_);
                if (end == std::string_view::npos) end = bytes_.size();
                comments.emplace_back(bytes_.substr(pos_ + 1, end - pos_ - 1));
                pos_ = end;
                continue;
            }
            break;
        }
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) throw MalformedPgm("truncated header");
        return bytes_.substr(start, pos_ - start);
    }

    int integer() {
        const auto tok = token();
        int value = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw MalformedPgm("bad header integer '" + std::string(tok) + "'");
        return value;
    }

    std::size_t position() const { return pos_; }
    std::vector<std::string> comments;

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void apply_meta_comment(const std::string& comment, FrameMeta& meta) {
    std::istringstream in(comment);
    std::string word;
    in >> word;
    if (word != "vlp") return;
    while (in >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = word.substr(0, eq);
        double value = 0.0;
        const char* first = word.data() + eq + 1;
        const char* last = word.data() + word.size();
        const auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc() || res.ptr != last) throw MalformedPgm("bad metadata value for " + key);
        if (key == "exposure_us") meta.exposure_us = value;
        else if (key == "row_readout_us") meta.row_readout_us = value;
        else if (key == "iso_gain") meta.iso_gain = value;
    }
}

}  // namespace

Frame decode_pgm(std::string_view bytes) {
    HeaderReader reader(bytes);
    if (reader.token() != "P5") throw MalformedPgm("not a binary PGM (P5)");
    const int width = reader.integer();
    const int height = reader.integer();
    const int maxval = reader.integer();
    if (width <= 0 || height <= 0) throw MalformedPgm("non-positive dimensions");
    if (maxval != 255) throw MalformedPgm("only 8-bit PGM is supported");
    std::size_t pos = reader.position();
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw MalformedPgm("missing separator after header");
    ++pos;
    FrameMeta meta;
    for (const auto& c : reader.comments) apply_meta_comment(c, meta);
    Frame frame(width, height, meta);
    const std::size_t n = frame.pixels().size();
    if (bytes.size() - pos < n) throw MalformedPgm("truncated pixel data");
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), n, frame.pixels().begin());
    return frame;
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string data = encode_pgm(frame);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Frame read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pgm(data);
}

}  // namespace vlp::render
