#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vlp::render {

struct FrameMeta {
    double exposure_us = 68.0;
    double row_readout_us = 5.0;
    double iso_gain = 100.0;
    friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

// Row-major 8-bit grayscale image.
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, FrameMeta meta = {});

    int width() const { return width_; }
    int height() const { return height_; }
    const FrameMeta& meta() const { return meta_; }

    std::uint8_t at(int row, int col) const { return pixels_[index(row, col)]; }
    std::uint8_t& at(int row, int col) { return pixels_[index(row, col)]; }

    std::span<const std::uint8_t> row(int r) const {
        return {pixels_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
    }
    std::span<std::uint8_t> row(int r) {
        return {pixels_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
    }

    const std::vector<std::uint8_t>& pixels() const { return pixels_; }
    std::vector<std::uint8_t>& pixels() { return pixels_; }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    FrameMeta meta_;
    std::vector<std::uint8_t> pixels_;
};

// Binary PGM (P5). Metadata travels in a "# vlp ..." comment line.
std::string encode_pgm(const Frame& frame);
Frame decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const Frame& frame);
Frame read_pgm(const std::filesystem::path& path);

}  // namespace vlp::render
