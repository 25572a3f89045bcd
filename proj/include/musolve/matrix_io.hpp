#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "musolve/errors.hpp"

// Persistence helpers. The matrix container is: magic "MUSMAT01", two
// little-endian uint64 (rows, cols), then row-major little-endian f64
// entries. Paths ending in ".txt" use the text fallback: a header line
// "MUSMAT01 rows cols" followed by one whitespace-separated row per line at
// 17 significant digits. All writes go through a temp file plus rename.

namespace musolve {

static_assert(std::endian::native == std::endian::little,
              "matrix container assumes a little-endian host");

inline constexpr const char *kMatrixMagicBinary = "MUSMAT1B";
inline constexpr const char *kMatrixMagicText = "MUSMAT1T";

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void atomic_write(const std::filesystem::path &path, const std::string &bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericalError("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw NumericalError("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_matrix(const std::filesystem::path &path, const Eigen::MatrixXd &m) {
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    if (path.extension() == ".txt") {
        std::string text = std::string(kMatrixMagicText) + " " + std::to_string(rows) + " " +
                           std::to_string(cols) + "\n";
        for (std::uint64_t i = 0; i < rows; ++i) {
            for (std::uint64_t j = 0; j < cols; ++j) {
                if (j) text += ' ';
                text += format_g17(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            text += '\n';
        }
        atomic_write(path, text);
        return;
    }
    std::string bytes;
    bytes.reserve(8 + 16 + rows * cols * 8);
    bytes.append(kMatrixMagicBinary, 8);
    auto append_u64 = [&](std::uint64_t v) {
        char raw[8];
        std::memcpy(raw, &v, 8);
        bytes.append(raw, 8);
    };
    append_u64(rows);
    append_u64(cols);
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) {
            char raw[8];
            const double v = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            std::memcpy(raw, &v, 8);
            bytes.append(raw, 8);
        }
    atomic_write(path, bytes);
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open matrix file: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMatrixMagicBinary, 8) != 0) {
        // Text fallback: rewind and parse the header line.
        in.clear();
        in.seekg(0);
        std::string tag;
        std::uint64_t rows = 0, cols = 0;
        if (!(in >> tag >> rows >> cols) || tag != kMatrixMagicText)
            throw ConfigError("not a matrix container: " + path.string());
        Eigen::MatrixXd m(rows, cols);
        for (std::uint64_t i = 0; i < rows; ++i)
            for (std::uint64_t j = 0; j < cols; ++j)
                if (!(in >> m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))))
                    throw ConfigError("truncated text matrix: " + path.string());
        return m;
    }
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char *>(&rows), 8);
    in.read(reinterpret_cast<char *>(&cols), 8);
    if (!in) throw ConfigError("truncated matrix header: " + path.string());
    Eigen::MatrixXd m(rows, cols);
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) {
            double v;
            in.read(reinterpret_cast<char *>(&v), 8);
            if (!in) throw ConfigError("truncated matrix payload: " + path.string());
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    return m;
}

// FNV-1a 64-bit content hash, reported as 16 hex digits.
inline std::uint64_t fnv1a64(const void *data, std::size_t size) {
    const auto *bytes = static_cast<const unsigned char *>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline std::string fnv1a64_hex(const std::string &bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

inline std::string hash_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NumericalError("cannot hash missing file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64_hex(bytes);
}

} // namespace musolve
