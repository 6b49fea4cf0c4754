#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace firzen::binio {

// Little-endian primitives shared by every binary container (graph bundles,
// checkpoints). Explicit byte order keeps files portable across hosts.

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw std::runtime_error("binio: truncated input (u64)");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    std::uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("binio: truncated input (string)");
    return s;
}

inline void write_u64_vec(std::ostream& os, const std::vector<std::size_t>& v) {
    write_u64(os, v.size());
    for (std::size_t x : v) write_u64(os, x);
}

inline std::vector<std::size_t> read_u64_vec(std::istream& is) {
    std::uint64_t n = read_u64(is);
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = static_cast<std::size_t>(read_u64(is));
    return v;
}

inline void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    for (double x : v) write_f64(os, x);
}

inline std::vector<double> read_f64_vec(std::istream& is) {
    std::uint64_t n = read_u64(is);
    std::vector<double> v(n);
    for (auto& x : v) x = read_f64(is);
    return v;
}

inline void expect_magic(std::istream& is, const std::string& magic, const std::string& what) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (!is || got != magic) throw std::runtime_error(what + ": bad magic header");
}

}  // namespace firzen::binio
