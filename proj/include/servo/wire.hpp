#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace servo {

class WireError : public std::runtime_error {
public:
    explicit WireError(const std::string& what) : std::runtime_error(what) {}
};

// Little-endian byte stream writer.
class ByteWriter {
public:
    std::vector<uint8_t>& bytes() { return buf_; }
    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

    void put_u8(uint8_t v) { buf_.push_back(v); }
    void put_u16(uint16_t v) { put_le(v, 2); }
    void put_u32(uint32_t v) { put_le(v, 4); }
    void put_u64(uint64_t v) { put_le(v, 8); }
    void put_i32(int32_t v) { put_le(static_cast<uint32_t>(v), 4); }
    void put_i64(int64_t v) { put_le(static_cast<uint64_t>(v), 8); }

    void put_f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(bits);
    }

    void put_bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void put_bytes(const std::vector<uint8_t>& v) { put_bytes(v.data(), v.size()); }

    void put_string(const std::string& s) {
        put_u32(static_cast<uint32_t>(s.size()));
        put_bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    }

private:
    void put_le(uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    std::vector<uint8_t> buf_;
};

// Little-endian byte stream reader with bounds checking. Any overrun throws
// WireError, which payload decoders surface as a malformed-payload condition.
class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t n) : p_(data), n_(n) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : p_(v.data()), n_(v.size()) {}

    size_t remaining() const { return n_ - pos_; }
    bool done() const { return pos_ == n_; }

    uint8_t get_u8() { return static_cast<uint8_t>(get_le(1)); }
    uint16_t get_u16() { return static_cast<uint16_t>(get_le(2)); }
    uint32_t get_u32() { return static_cast<uint32_t>(get_le(4)); }
    uint64_t get_u64() { return get_le(8); }
    int32_t get_i32() { return static_cast<int32_t>(get_u32()); }
    int64_t get_i64() { return static_cast<int64_t>(get_u64()); }

    double get_f64() {
        uint64_t bits = get_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::vector<uint8_t> get_bytes(size_t n) {
        need(n);
        std::vector<uint8_t> out(p_ + pos_, p_ + pos_ + n);
        pos_ += n;
        return out;
    }

    std::string get_string() {
        uint32_t n = get_u32();
        need(n);
        std::string out(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return out;
    }

private:
    void need(size_t n) {
        if (remaining() < n) throw WireError("truncated payload");
    }

    uint64_t get_le(int n) {
        need(static_cast<size_t>(n));
        uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(p_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }

    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

std::string base64_encode(const uint8_t* data, size_t n);
std::string base64_encode(const std::vector<uint8_t>& v);
std::vector<uint8_t> base64_decode(const std::string& s);

}  // namespace servo
