#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmr/matrix.hpp"

namespace pmr {

// A named f32 tensor as stored in PMRF containers. In-memory compute uses
// doubles; values are narrowed to f32 on write.
struct TensorBlob {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (std::uint32_t d : shape) n *= d;
        return n;
    }

    bool valid() const {
        if (shape.empty()) return false;
        for (std::uint32_t d : shape)
            if (d < 1) return false;
        return element_count() == data.size();
    }
};

struct ContainerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : ContainerError {
    using ContainerError::ContainerError;
};
struct BadMagicError : ContainerError {
    using ContainerError::ContainerError;
};
struct BadVersionError : ContainerError {
    using ContainerError::ContainerError;
};
struct TruncatedError : ContainerError {
    using ContainerError::ContainerError;
};
struct SizeMismatchError : ContainerError {
    using ContainerError::ContainerError;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.append(b, 4);
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > buf.size()) throw TruncatedError("PMRF: truncated while reading u32");
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
        pos += 4;
        return v;
    }

    std::string bytes(std::size_t n) {
        if (pos + n > buf.size()) throw TruncatedError("PMRF: truncated payload");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace detail

// Bit-exact layout: magic "PMRF", u32 version (=1), u32 blob count; per
// blob: u32 name length, name bytes, u32 rank, u32 per dim, f32 data
// (row-major). All integers and floats little-endian.
inline std::string serialize_container(const std::vector<TensorBlob>& blobs) {
    std::string out;
    out.append("PMRF", 4);
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(blobs.size()));
    for (const TensorBlob& b : blobs) {
        if (!b.valid()) throw ContainerError("PMRF: invalid blob '" + b.name + "'");
        if (b.name.size() > std::numeric_limits<std::uint32_t>::max() ||
            b.data.size() > std::numeric_limits<std::uint32_t>::max())
            throw ContainerError("PMRF: dimension overflow in blob '" + b.name + "'");
        detail::put_u32(out, static_cast<std::uint32_t>(b.name.size()));
        out.append(b.name);
        detail::put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
        for (std::uint32_t d : b.shape) detail::put_u32(out, d);
        for (float v : b.data) detail::put_f32(out, v);
    }
    return out;
}

inline std::vector<TensorBlob> deserialize_container(const std::string& buf) {
    if (buf.size() < 4 || buf.compare(0, 4, "PMRF") != 0)
        throw BadMagicError("PMRF: bad magic bytes");
    detail::Reader r{buf, 4};
    const std::uint32_t version = r.u32();
    if (version != 1) throw BadVersionError("PMRF: unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::vector<TensorBlob> blobs;
    blobs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorBlob b;
        b.name = r.bytes(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank == 0) throw SizeMismatchError("PMRF: rank 0 blob '" + b.name + "'");
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const std::uint32_t d = r.u32();
            if (d == 0) throw SizeMismatchError("PMRF: zero dim in blob '" + b.name + "'");
            b.shape.push_back(d);
            n *= d;
        }
        b.data.reserve(n);
        for (std::size_t k = 0; k < n; ++k) b.data.push_back(r.f32());
        blobs.push_back(std::move(b));
    }
    if (r.pos != buf.size())
        throw SizeMismatchError("PMRF: declared sizes do not match file length");
    return blobs;
}

inline void write_tensor_container(const std::vector<TensorBlob>& blobs, const std::string& path) {
    const std::string bytes = serialize_container(blobs);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<TensorBlob> read_tensor_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_container(buf);
}

inline TensorBlob matrix_to_blob(const std::string& name, const Matrix& m) {
    TensorBlob b;
    b.name = name;
    b.shape = {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)};
    b.data.assign(m.data.begin(), m.data.end());
    return b;
}

inline Matrix blob_to_matrix(const TensorBlob& b) {
    std::size_t rows = b.shape[0];
    std::size_t cols = b.element_count() / rows;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = b.data[i];
    return m;
}

}  // namespace pmr
