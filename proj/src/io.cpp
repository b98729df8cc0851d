#include "minmaxent/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts unsupported");

namespace mme::io {

namespace fs = std::filesystem;

void atomic_write(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

const std::string& Checkpoint::get(const std::string& key) const {
    for (const auto& [k, v] : header)
        if (k == key) return v;
    throw std::runtime_error("checkpoint: missing key '" + key + "'");
}

bool Checkpoint::has(const std::string& key) const {
    for (const auto& [k, v] : header)
        if (k == key) return true;
    return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string out;
    for (const auto& [k, v] : ck.header) out += k + " " + v + "\n";
    out += "blob " + std::to_string(ck.blob.size()) + "\n";
    const std::size_t bytes = static_cast<std::size_t>(ck.blob.size()) * sizeof(double);
    const std::size_t text_len = out.size();
    out.resize(text_len + bytes);
    std::memcpy(out.data() + text_len, ck.blob.data(), bytes);
    atomic_write(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    Checkpoint ck;
    std::string line;
    long count = -1;
    while (std::getline(in, line)) {
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "blob") {
            count = std::stol(value);
            break;
        }
        ck.header.emplace_back(key, value);
    }
    if (count < 0) throw std::runtime_error("checkpoint " + path + ": no blob marker");
    ck.blob.resize(count);
    in.read(reinterpret_cast<char*>(ck.blob.data()), count * static_cast<long>(sizeof(double)));
    if (in.gcount() != count * static_cast<long>(sizeof(double)))
        throw std::runtime_error("checkpoint " + path + ": truncated blob");
    return ck;
}

void write_csv(const std::string& path, const std::string& header, const Matrix& rows) {
    std::ostringstream out;
    out.precision(17);
    if (!header.empty()) out << header << "\n";
    for (Index i = 0; i < rows.rows(); ++i) {
        for (Index j = 0; j < rows.cols(); ++j) {
            if (j) out << ",";
            out << rows(i, j);
        }
        out << "\n";
    }
    atomic_write(path, out.str());
}

Matrix read_csv(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    if (skip_header) std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    return m;
}

std::vector<std::uint8_t> to_gray_bytes(const Vector& values) {
    std::vector<std::uint8_t> out(values.size());
    for (Index i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, int width, int height) {
    if (static_cast<std::size_t>(width) * height != pixels.size())
        throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    atomic_write(path, out);
}

namespace {

void push_be32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xFF));
    s.push_back(static_cast<char>((v >> 16) & 0xFF));
    s.push_back(static_cast<char>((v >> 8) & 0xFF));
    s.push_back(static_cast<char>(v & 0xFF));
}

void push_chunk(std::string& out, const char type[4], const std::string& data) {
    push_be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    push_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int width, int height) {
    if (static_cast<std::size_t>(width) * height != pixels.size())
        throw std::invalid_argument("write_png_gray: pixel count does not match dimensions");

    std::string ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(width));
    push_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // color type: grayscale
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace

    // Raw scanlines, each prefixed with filter byte 0.
    std::vector<std::uint8_t> raw;
    raw.reserve(pixels.size() + height);
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<std::size_t>(r) * width,
                   pixels.begin() + static_cast<std::size_t>(r + 1) * width);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("write_png_gray: zlib compression failed");

    std::string out("\x89PNG\r\n\x1a\n", 8);
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", std::string(reinterpret_cast<const char*>(comp.data()), comp_len));
    push_chunk(out, "IEND", "");
    atomic_write(path, out);
}

TiledImage tile_images(const Matrix& samples, int side, int columns) {
    const int n = static_cast<int>(samples.rows());
    if (n == 0 || samples.cols() != side * side)
        throw std::invalid_argument("tile_images: samples must be n x side^2, n >= 1");
    columns = std::max(1, std::min(columns, n));
    const int rows = (n + columns - 1) / columns;
    const int gap = 1;
    TiledImage img;
    img.width = columns * side + (columns - 1) * gap;
    img.height = rows * side + (rows - 1) * gap;
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
    for (int i = 0; i < n; ++i) {
        const int tr = i / columns, tc = i % columns;
        const int y0 = tr * (side + gap), x0 = tc * (side + gap);
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                const double v = std::clamp(samples(i, r * side + c), 0.0, 1.0);
                img.pixels[static_cast<std::size_t>(y0 + r) * img.width + (x0 + c)] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    }
    return img;
}

}  // namespace mme::io
