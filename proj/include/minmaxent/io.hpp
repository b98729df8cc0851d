#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "minmaxent/types.hpp"

namespace mme::io {

// All writers are atomic: content goes to a sibling temp file which is
// renamed over the target, so interrupted runs never leave truncated files.

void atomic_write(const std::string& path, const std::string& content);

/// Checkpoint container: plain-text key/value header lines, then a line
/// "blob <count>" followed by count raw little-endian float64 values.
struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> header;
    Vector blob;

    void set(const std::string& key, const std::string& value) { header.emplace_back(key, value); }
    const std::string& get(const std::string& key) const;           // throws if missing
    bool has(const std::string& key) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// CSV with one row per line; header optional (empty string skips it).
void write_csv(const std::string& path, const std::string& header, const Matrix& rows);
Matrix read_csv(const std::string& path, bool skip_header);

/// 8-bit grayscale PGM (P5). Values clamped from [0,1].
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, int width, int height);

/// 8-bit grayscale PNG via zlib.
void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int width, int height);

/// Tile n flattened side*side images (rows of `samples`, values in [0,1])
/// into one grayscale byte image with 1-pixel separators.
struct TiledImage {
    std::vector<std::uint8_t> pixels;
    int width = 0;
    int height = 0;
};
TiledImage tile_images(const Matrix& samples, int side, int columns);

std::vector<std::uint8_t> to_gray_bytes(const Vector& values);

}  // namespace mme::io
