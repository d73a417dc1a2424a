#include "vbdeblur/io.hpp"

#include "vbdeblur/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace vbd::io {

using grids::Image;
using grids::Index;
using grids::Kernel;
using grids::Shape;

void write_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::random_device rd;
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.close();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into '" + path.string() + "'");
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

bool has_png_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

std::uint8_t to_byte(double v) {
    if (!std::isfinite(v)) v = 0.0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image decode_png(const std::string& bytes, const fs::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw IoError("'" + path.string() + "': " + img.message);
    img.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("'" + path.string() + "': " + img.message);
    }
    Image out(Shape{static_cast<Index>(img.width), static_cast<Index>(img.height)});
    for (Index i = 0; i < out.size(); ++i) out.values[i] = buf[static_cast<std::size_t>(i)] / 255.0;
    return out;
}

// Next header token of a PGM file, skipping '#' comments.
std::string pgm_token(const std::string& s, std::size_t& pos) {
    while (pos < s.size()) {
        if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '#') ++pos;
    return s.substr(start, pos - start);
}

Image decode_pgm(const std::string& s, const fs::path& path) {
    const auto bad = [&](const std::string& why) { return IoError("'" + path.string() + "': " + why); };
    std::size_t pos = 0;
    const std::string magic = pgm_token(s, pos);
    if (magic != "P2" && magic != "P5") throw bad("not a grayscale PGM or PNG");
    long w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(pgm_token(s, pos));
        h = std::stol(pgm_token(s, pos));
        maxval = std::stol(pgm_token(s, pos));
    } catch (const std::exception&) {
        throw bad("malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw bad("unsupported PGM dimensions or depth");
    Image out(Shape{w, h});
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (magic == "P2") {
        for (std::size_t i = 0; i < count; ++i) {
            const std::string t = pgm_token(s, pos);
            if (t.empty()) throw bad("truncated PGM data");
            out.values[static_cast<Index>(i)] = std::stod(t) / static_cast<double>(maxval);
        }
        return out;
    }
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (s.size() < pos + count * bpp) throw bad("truncated PGM data");
    for (std::size_t i = 0; i < count; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos + i * bpp);
        const unsigned v = bpp == 2 ? (p[0] << 8) | p[1] : p[0];
        out.values[static_cast<Index>(i)] = v / static_cast<double>(maxval);
    }
    return out;
}

}  // namespace

Image read_image(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("input file '" + path.string() + "' not found");
    const std::string bytes = read_text(path);
    if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0)
        return decode_png(bytes, path);
    return decode_pgm(bytes, path);
}

void write_image(const fs::path& path, const Image& image) {
    if (image.size() == 0) throw InvalidArgument("cannot write an empty image");
    std::vector<png_byte> px(static_cast<std::size_t>(image.size()));
    for (Index i = 0; i < image.size(); ++i) px[static_cast<std::size_t>(i)] = to_byte(image.values[i]);

    if (!has_png_extension(path)) {
        std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
        out.append(reinterpret_cast<const char*>(px.data()), px.size());
        write_atomic(path, out);
        return;
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, px.data(), 0, nullptr))
        throw IoError("PNG encoding failed: " + std::string(img.message));
    std::string buf(size, '\0');
    if (!png_image_write_to_memory(&img, buf.data(), &size, 0, px.data(), 0, nullptr))
        throw IoError("PNG encoding failed: " + std::string(img.message));
    buf.resize(size);
    write_atomic(path, buf);
}

void write_image_normalized(const fs::path& path, const Image& image) {
    Image scaled = image;
    const double lo = image.values.minCoeff(), hi = image.values.maxCoeff();
    if (hi > lo)
        scaled.values = (image.values.array() - lo) / (hi - lo);
    else
        scaled.values.setZero();
    write_image(path, scaled);
}

std::string format_kernel(const Kernel& k) {
    std::string out;
    char buf[32];
    for (Index r = 0; r < k.height(); ++r) {
        for (Index c = 0; c < k.width(); ++c) {
            std::snprintf(buf, sizeof buf, "%.10e", k.at(r, c));
            if (c) out += ' ';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

Kernel parse_kernel(const std::string& text) {
    std::vector<double> vals;
    Index width = -1, height = 0;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string cell;
        Index count = 0;
        while (cells >> cell) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw InvalidArgument("kernel file: bad number '" + cell + "'");
            }
            ++count;
        }
        if (count == 0) continue;
        if (width >= 0 && count != width) throw DimensionError("kernel file: ragged rows");
        width = count;
        ++height;
    }
    if (height == 0) throw InvalidArgument("kernel file is empty");
    Kernel k(Shape{width, height}, Eigen::Map<grids::Vec>(vals.data(), static_cast<Index>(vals.size())));
    k.validate();
    return k;
}

Kernel read_kernel(const fs::path& path) { return parse_kernel(read_text(path)); }

void write_kernel(const fs::path& path, const Kernel& k) { write_atomic(path, format_kernel(k)); }

Csv::Csv(std::vector<std::string> header) : columns_(header.size()) { row(header); }

Csv& Csv::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw DimensionError("CSV row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        const std::string& c = cells[i];
        if (c.find_first_of(",\"\n") != std::string::npos) {
            text_ += '"';
            for (char ch : c) text_ += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            text_ += '"';
        } else {
            text_ += c;
        }
    }
    text_ += '\n';
    return *this;
}

std::string Csv::str() const { return text_; }

void Csv::save(const fs::path& path) const { write_atomic(path, text_); }

std::string Csv::num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string Csv::num(long long v) { return std::to_string(v); }

}  // namespace vbd::io
