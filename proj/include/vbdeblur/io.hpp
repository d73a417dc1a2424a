#pragma once

// Files in and out: 8-bit grayscale PGM/PNG images, kernel text matrices,
// CSV tables. Every writer goes through write_atomic.

#include "vbdeblur/grids.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vbd::io {

namespace fs = std::filesystem;

// Writes to a temporary file next to `path`, then renames it into place.
void write_atomic(const fs::path& path, const std::string& contents);
std::string read_text(const fs::path& path);

// Grayscale in [0, 1]. Colour PNGs are reduced to gray by libpng. The format
// is chosen by the magic bytes when reading and by the extension when
// writing (.png, else binary PGM). Values are clamped to [0, 1] on output.
grids::Image read_image(const fs::path& path);
void write_image(const fs::path& path, const grids::Image& image);

// Scales [min, max] to [0, 1] first (a constant image maps to 0).
void write_image_normalized(const fs::path& path, const grids::Image& image);

// Whitespace-separated rows, one per kernel row.
std::string format_kernel(const grids::Kernel& k);
grids::Kernel parse_kernel(const std::string& text);
grids::Kernel read_kernel(const fs::path& path);
void write_kernel(const fs::path& path, const grids::Kernel& k);

class Csv {
public:
    explicit Csv(std::vector<std::string> header);

    Csv& row(const std::vector<std::string>& cells);
    std::string str() const;
    void save(const fs::path& path) const;

    static std::string num(double v);
    static std::string num(long long v);

private:
    std::size_t columns_;
    std::string text_;
};

}  // namespace vbd::io
