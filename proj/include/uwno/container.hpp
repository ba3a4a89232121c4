#pragma once

// UWNO binary container: named n-dimensional arrays, little-endian on disk
// regardless of host.
//
// Layout:
//   magic   "UWNO"             4 bytes
//   version u16                (currently 1)
//   count   u32                number of records
//   record: name_len u16, name bytes (UTF-8), dtype u8 (0 = f64, 1 = i64),
//           ndim u8, shape u64 x ndim, payload (8 * prod(shape) bytes,
//           row-major)
//
// An empty container is exactly 10 bytes. Read errors carry the byte offset
// and, where known, the record name.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "uwno/errors.hpp"
#include "uwno/tensor.hpp"

namespace uwno {

struct ContainerRecord {
    enum class Dtype : std::uint8_t { F64 = 0, I64 = 1 };
    std::string name;
    Dtype dtype = Dtype::F64;
    Shape shape;
    std::vector<double> f64;
    std::vector<std::int64_t> i64;

    std::size_t count() const { return shape_numel(shape); }
};

namespace detail {

inline void put_u16(std::string& b, std::uint16_t v) {
    b.push_back(char(v & 0xff));
    b.push_back(char((v >> 8) & 0xff));
}
inline void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& b, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(b, v);
}

struct ByteReader {
    const unsigned char* p;
    std::size_t size;
    std::size_t off = 0;

    void need(std::size_t n, const std::string& what) const {
        if (off + n > size)
            throw IoError("container truncated at byte " + std::to_string(off) +
                          " while reading " + what + " (need " + std::to_string(n) +
                          " bytes, have " + std::to_string(size - off) + ")");
    }
    std::uint16_t u16(const std::string& what) {
        need(2, what);
        std::uint16_t v = std::uint16_t(p[off]) | (std::uint16_t(p[off + 1]) << 8);
        off += 2;
        return v;
    }
    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64(const std::string& what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[off + i]) << (8 * i);
        off += 8;
        return v;
    }
};

}  // namespace detail

class Container {
public:
    static constexpr std::uint16_t kVersion = 1;

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const ContainerRecord& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw IoError("container has no record named '" + name + "'");
        return records_[it->second];
    }

    const std::vector<ContainerRecord>& records() const { return records_; }

    void put_f64(const std::string& name, Shape shape, std::vector<double> data) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("container record '" + name + "': shape " + shape_str(shape) +
                             " wants " + std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
        ContainerRecord r;
        r.name = name;
        r.dtype = ContainerRecord::Dtype::F64;
        r.shape = std::move(shape);
        r.f64 = std::move(data);
        insert(std::move(r));
    }

    void put_i64(const std::string& name, Shape shape, std::vector<std::int64_t> data) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("container record '" + name + "': shape " + shape_str(shape) +
                             " wants " + std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
        ContainerRecord r;
        r.name = name;
        r.dtype = ContainerRecord::Dtype::I64;
        r.shape = std::move(shape);
        r.i64 = std::move(data);
        insert(std::move(r));
    }

    void put_tensor(const std::string& name, const Tensor& t) {
        put_f64(name, t.shape(), t.data());
    }

    Tensor get_tensor(const std::string& name) const {
        const auto& r = get(name);
        if (r.dtype != ContainerRecord::Dtype::F64)
            throw IoError("container record '" + name + "' is not f64");
        return Tensor::from_data(r.shape, r.f64);
    }

    void put_scalar_i64(const std::string& name, std::int64_t v) { put_i64(name, {1}, {v}); }

    std::int64_t get_scalar_i64(const std::string& name) const {
        const auto& r = get(name);
        if (r.dtype != ContainerRecord::Dtype::I64 || r.count() != 1)
            throw IoError("container record '" + name + "' is not a scalar i64");
        return r.i64[0];
    }

    void put_scalar_f64(const std::string& name, double v) { put_f64(name, {1}, {v}); }

    double get_scalar_f64(const std::string& name) const {
        const auto& r = get(name);
        if (r.dtype != ContainerRecord::Dtype::F64 || r.count() != 1)
            throw IoError("container record '" + name + "' is not a scalar f64");
        return r.f64[0];
    }

    void put_string(const std::string& name, const std::string& s) {
        std::vector<std::int64_t> codes(s.begin(), s.end());
        const std::size_t n = codes.size();
        put_i64(name, {n}, std::move(codes));
    }

    std::string get_string(const std::string& name) const {
        const auto& r = get(name);
        if (r.dtype != ContainerRecord::Dtype::I64)
            throw IoError("container record '" + name + "' is not an i64 string record");
        std::string s;
        for (auto c : r.i64) s.push_back(char(c));
        return s;
    }

    std::string serialize() const {
        std::string b;
        b += "UWNO";
        detail::put_u16(b, kVersion);
        detail::put_u32(b, (std::uint32_t)records_.size());
        for (const auto& r : records_) {
            if (r.name.size() > 0xffff)
                throw ValueError("container record name too long: " + r.name);
            detail::put_u16(b, (std::uint16_t)r.name.size());
            b += r.name;
            b.push_back(char(r.dtype));
            b.push_back(char(r.shape.size()));
            for (auto d : r.shape) detail::put_u64(b, d);
            if (r.dtype == ContainerRecord::Dtype::F64)
                for (double v : r.f64) detail::put_f64(b, v);
            else
                for (std::int64_t v : r.i64) detail::put_u64(b, (std::uint64_t)v);
        }
        return b;
    }

    static Container deserialize(const std::string& bytes) {
        Container c;
        detail::ByteReader br{reinterpret_cast<const unsigned char*>(bytes.data()),
                              bytes.size()};
        br.need(4, "magic");
        if (std::memcmp(br.p, "UWNO", 4) != 0)
            throw IoError("bad container magic at byte 0 (expected 'UWNO')");
        br.off = 4;
        const std::uint16_t version = br.u16("version");
        if (version != kVersion)
            throw IoError("unsupported container version " + std::to_string(version) +
                          " at byte 4 (expected " + std::to_string(kVersion) + ")");
        const std::uint32_t count = br.u32("record count");
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint16_t name_len = br.u16("name length of record " + std::to_string(i));
            br.need(name_len, "name of record " + std::to_string(i));
            std::string name(reinterpret_cast<const char*>(br.p + br.off), name_len);
            br.off += name_len;
            br.need(1, "dtype of '" + name + "'");
            const std::uint8_t dt = br.p[br.off++];
            if (dt > 1)
                throw IoError("record '" + name + "': unknown dtype code " +
                              std::to_string(int(dt)) + " at byte " + std::to_string(br.off - 1));
            br.need(1, "ndim of '" + name + "'");
            const std::uint8_t ndim = br.p[br.off++];
            Shape shape(ndim);
            for (std::uint8_t d = 0; d < ndim; ++d)
                shape[d] = br.u64("shape of '" + name + "'");
            const std::size_t n = shape_numel(shape);
            if (n > (std::size_t(1) << 34))
                throw IoError("record '" + name + "': corrupted shape (" + std::to_string(n) +
                              " elements) at byte " + std::to_string(br.off));
            br.need(8 * n, "payload of '" + name + "'");
            ContainerRecord r;
            r.name = name;
            r.dtype = ContainerRecord::Dtype(dt);
            r.shape = std::move(shape);
            if (r.dtype == ContainerRecord::Dtype::F64) {
                r.f64.resize(n);
                for (std::size_t k = 0; k < n; ++k) {
                    std::uint64_t v = br.u64("payload of '" + name + "'");
                    double d;
                    std::memcpy(&d, &v, 8);
                    r.f64[k] = d;
                }
            } else {
                r.i64.resize(n);
                for (std::size_t k = 0; k < n; ++k)
                    r.i64[k] = (std::int64_t)br.u64("payload of '" + name + "'");
            }
            c.insert(std::move(r));
        }
        if (br.off != bytes.size())
            throw IoError("container has " + std::to_string(bytes.size() - br.off) +
                          " trailing bytes at byte " + std::to_string(br.off));
        return c;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + path + "' for writing");
        const std::string b = serialize();
        f.write(b.data(), (std::streamsize)b.size());
        if (!f) throw IoError("write failed for '" + path + "'");
    }

    static Container read(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open '" + path + "' for reading");
        std::string bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
        return deserialize(bytes);
    }

private:
    void insert(ContainerRecord r) {
        if (index_.count(r.name))
            throw ValueError("duplicate container record name '" + r.name + "'");
        index_[r.name] = records_.size();
        records_.push_back(std::move(r));
    }

    std::vector<ContainerRecord> records_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace uwno
