#pragma once

#include <annolab/error.hpp>

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace annolab {

// Row-major float matrix; row i corresponds to global sample index i.
struct FeatureMatrix {
    std::size_t n_samples = 0;
    std::size_t n_dims = 0;
    std::vector<float> values;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
        : n_samples(rows), n_dims(cols), values(std::move(data)) {
        if (values.size() != rows * cols)
            fail(ErrorKind::ShapeMismatch, "matrix buffer holds " + std::to_string(values.size()) +
                                               " values, expected " + std::to_string(rows * cols));
    }

    std::span<const float> row(std::size_t i) const {
        return {values.data() + i * n_dims, n_dims};
    }
    std::span<float> row(std::size_t i) { return {values.data() + i * n_dims, n_dims}; }

    float operator()(std::size_t i, std::size_t j) const { return values[i * n_dims + j]; }
    float& operator()(std::size_t i, std::size_t j) { return values[i * n_dims + j]; }

    bool operator==(const FeatureMatrix&) const = default;
};

// Binary matrix format shared by feature files and projection coordinates:
//   u32 LE n_rows | u32 LE n_cols | n_rows*n_cols f32 LE, row-major.
namespace matrix_format {

inline constexpr std::size_t header_bytes = 8;

inline std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void write_u32_le(std::string& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

inline FeatureMatrix decode(std::span<const unsigned char> bytes) {
    if (bytes.size() < header_bytes)
        fail(ErrorKind::ShapeMismatch, "matrix payload shorter than its 8-byte header");
    const std::uint32_t rows = read_u32_le(bytes.data());
    const std::uint32_t cols = read_u32_le(bytes.data() + 4);
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    if (bytes.size() != header_bytes + 4 * count)
        fail(ErrorKind::ShapeMismatch, "matrix payload is " + std::to_string(bytes.size()) +
                                           " bytes, header declares " + std::to_string(rows) + "x" +
                                           std::to_string(cols));
    std::vector<float> values(count);
    const unsigned char* p = bytes.data() + header_bytes;
    for (std::size_t i = 0; i < count; ++i, p += 4) values[i] = std::bit_cast<float>(read_u32_le(p));
    return FeatureMatrix(rows, cols, std::move(values));
}

inline std::string encode(std::size_t rows, std::size_t cols, std::span<const float> values) {
    std::string out;
    out.reserve(header_bytes + 4 * values.size());
    write_u32_le(out, static_cast<std::uint32_t>(rows));
    write_u32_le(out, static_cast<std::uint32_t>(cols));
    for (float v : values) write_u32_le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline std::string encode(const FeatureMatrix& m) { return encode(m.n_samples, m.n_dims, m.values); }

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline FeatureMatrix read(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    return decode({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

inline void write(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    const std::string bytes = encode(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace matrix_format

} // namespace annolab
