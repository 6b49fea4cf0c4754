#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "firzen/core/matrix.hpp"

namespace firzen {

enum class Modality { Text, Image };

inline const char* modality_name(Modality m) { return m == Modality::Text ? "text" : "image"; }
inline Modality parse_modality(const std::string& s) {
    if (s == "text") return Modality::Text;
    if (s == "image") return Modality::Image;
    throw std::invalid_argument("unknown modality: " + s);
}

struct FeatureMatrix {
    Modality modality = Modality::Text;
    Mat values;  // item_count x dim
    std::size_t dim() const { return values.cols(); }
};

namespace detail {

inline float load_le_f32(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline void store_le_f32(float f, unsigned char* p) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    p[0] = bits & 0xff;
    p[1] = (bits >> 8) & 0xff;
    p[2] = (bits >> 16) & 0xff;
    p[3] = (bits >> 24) & 0xff;
}

}  // namespace detail

// File format: one text header line "rows cols\n", then rows*cols row-major
// little-endian float32 values.
inline FeatureMatrix load_features(std::istream& in, Modality modality, std::size_t expected_items,
                                   const std::string& name = "<stream>") {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error(name + ": missing feature header");
    std::size_t rows = 0, cols = 0;
    {
        std::istringstream hs(header);
        if (!(hs >> rows >> cols) || rows == 0 || cols == 0)
            throw std::runtime_error(name + ": bad feature header '" + header + "'");
    }
    if (rows != expected_items)
        throw std::runtime_error(name + ": feature rows " + std::to_string(rows) +
                                 " do not match item count " + std::to_string(expected_items));
    FeatureMatrix fm;
    fm.modality = modality;
    fm.values = Mat(rows, cols);
    std::vector<unsigned char> buf(cols * 4);
    for (std::size_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw std::runtime_error(name + ": truncated feature data at row " + std::to_string(r));
        for (std::size_t c = 0; c < cols; ++c) {
            double v = detail::load_le_f32(buf.data() + c * 4);
            if (!std::isfinite(v))
                throw std::runtime_error(name + ": non-finite feature value at row " +
                                         std::to_string(r));
            fm.values(r, c) = v;
        }
    }
    return fm;
}

inline FeatureMatrix load_features_file(const std::string& path, Modality modality,
                                        std::size_t expected_items) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_features(in, modality, expected_items, path);
}

inline void save_features(const FeatureMatrix& fm, std::ostream& out) {
    out << fm.values.rows() << ' ' << fm.values.cols() << '\n';
    std::vector<unsigned char> buf(fm.values.cols() * 4);
    for (std::size_t r = 0; r < fm.values.rows(); ++r) {
        for (std::size_t c = 0; c < fm.values.cols(); ++c)
            detail::store_le_f32(static_cast<float>(fm.values(r, c)), buf.data() + c * 4);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
}

inline void save_features_file(const FeatureMatrix& fm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_features(fm, out);
}

}  // namespace firzen
