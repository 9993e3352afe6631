#pragma once
// Little-endian binary readers and writers for the model and database
// file formats. All multi-byte values are written explicitly byte by
// byte so files are portable.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace septa {

inline void write_u32le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64le(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_i64le(std::ostream& out, int64_t v) {
    write_u64le(out, static_cast<uint64_t>(v));
}

inline void write_f32le(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u32le(out, bits);
}

inline uint32_t read_u32le(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(std::string("truncated file while reading ") + what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t read_u64le(std::istream& in, const char* what) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error(std::string("truncated file while reading ") + what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline int64_t read_i64le(std::istream& in, const char* what) {
    return static_cast<int64_t>(read_u64le(in, what));
}

inline float read_f32le(std::istream& in, const char* what) {
    uint32_t bits = read_u32le(in, what);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

inline void write_magic(std::ostream& out, const char magic[4]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char magic[4], const std::string& path) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0) {
        throw std::runtime_error("bad magic in " + path + " (expected " +
                                 std::string(magic, 4) + ")");
    }
}

}  // namespace septa
