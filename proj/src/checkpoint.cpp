// SPDX-License-Identifier: Apache-2.0
#include "dni/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dni {

namespace {

constexpr char kMagic[8] = {'D', 'N', 'I', 'C', 'K', 'P', 'T', '\0'};

void append_bytes(std::vector<std::uint8_t>& out, const void* src, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(src);
    out.insert(out.end(), p, p + n);
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(out, bits);
}

/// Bounds-checked little-endian cursor over a byte buffer.
struct ByteCursor {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    std::vector<std::uint8_t> blob(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> b(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                    buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return b;
    }
};

}  // namespace

// ---- writer -------------------------------------------------------------------

void CheckpointWriter::add(const std::string& key, RecordType type,
                           std::vector<std::uint8_t> payload) {
    if (key.empty()) throw std::invalid_argument("checkpoint: empty record key");
    if (!index_.emplace(key, records_.size()).second)
        throw std::invalid_argument("checkpoint: duplicate record key '" + key + "'");
    records_.push_back({key, type, std::move(payload)});
}

void CheckpointWriter::put_bytes(const std::string& key, const std::string& value) {
    std::vector<std::uint8_t> p;
    append_bytes(p, value.data(), value.size());
    add(key, RecordType::bytes, std::move(p));
}

void CheckpointWriter::put_u64(const std::string& key, std::uint64_t value) {
    std::vector<std::uint8_t> p;
    append_u64(p, value);
    add(key, RecordType::u64, std::move(p));
}

void CheckpointWriter::put_f64(const std::string& key, double value) {
    std::vector<std::uint8_t> p;
    append_f64(p, value);
    add(key, RecordType::f64, std::move(p));
}

void CheckpointWriter::put_tensor(const std::string& key, const Tensor& value) {
    std::vector<std::uint8_t> p;
    append_u64(p, value.ndim());
    for (std::size_t d : value.shape()) append_u64(p, d);
    p.reserve(p.size() + value.size() * 8);
    for (std::size_t i = 0; i < value.size(); ++i) append_f64(p, value[i]);
    add(key, RecordType::tensor, std::move(p));
}

std::vector<std::uint8_t> CheckpointWriter::to_bytes() const {
    std::vector<std::uint8_t> out;
    append_bytes(out, kMagic, 8);
    append_u32(out, CheckpointReader::kVersion);
    append_u64(out, records_.size());
    for (const Record& r : records_) {
        append_u32(out, static_cast<std::uint32_t>(r.key.size()));
        append_bytes(out, r.key.data(), r.key.size());
        out.push_back(static_cast<std::uint8_t>(r.type));
        append_u64(out, r.payload.size());
        append_bytes(out, r.payload.data(), r.payload.size());
    }
    return out;
}

void CheckpointWriter::save(const std::string& path) const {
    const std::vector<std::uint8_t> bytes = to_bytes();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

// ---- reader -------------------------------------------------------------------

CheckpointReader CheckpointReader::from_bytes(const std::vector<std::uint8_t>& bytes) {
    ByteCursor cur{bytes};
    const std::string magic = cur.str(8);
    if (std::memcmp(magic.data(), kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic, not a checkpoint file");
    CheckpointReader r;
    r.version_ = cur.u32();
    if (r.version_ != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(r.version_));
    const std::uint64_t count = cur.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t keylen = cur.u32();
        std::string key = cur.str(keylen);
        cur.need(1);
        const std::uint8_t type_byte = bytes[cur.pos++];
        if (type_byte > static_cast<std::uint8_t>(RecordType::tensor))
            throw std::runtime_error("checkpoint: unknown record type in '" + key + "'");
        const auto type = static_cast<RecordType>(type_byte);
        const std::uint64_t len = cur.u64();
        std::vector<std::uint8_t> payload = cur.blob(len);
        if (!r.records_.emplace(key, std::make_pair(type, std::move(payload))).second)
            throw std::runtime_error("checkpoint: duplicate record key '" + key + "'");
        r.entries_.push_back({std::move(key), type, len});
    }
    if (cur.pos != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes after records");
    return r;
}

CheckpointReader CheckpointReader::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

bool CheckpointReader::has(const std::string& key) const { return records_.count(key) != 0; }

const std::vector<std::uint8_t>& CheckpointReader::payload(const std::string& key,
                                                           RecordType want) const {
    auto it = records_.find(key);
    if (it == records_.end()) throw std::runtime_error("checkpoint: missing record '" + key + "'");
    if (it->second.first != want)
        throw std::runtime_error("checkpoint: record '" + key + "' has the wrong type");
    return it->second.second;
}

std::string CheckpointReader::bytes(const std::string& key) const {
    const auto& p = payload(key, RecordType::bytes);
    return std::string(reinterpret_cast<const char*>(p.data()), p.size());
}

std::uint64_t CheckpointReader::u64(const std::string& key) const {
    const auto& p = payload(key, RecordType::u64);
    ByteCursor cur{p};
    const std::uint64_t v = cur.u64();
    return v;
}

double CheckpointReader::f64(const std::string& key) const {
    const auto& p = payload(key, RecordType::f64);
    ByteCursor cur{p};
    return cur.f64();
}

Tensor CheckpointReader::tensor(const std::string& key) const {
    const auto& p = payload(key, RecordType::tensor);
    ByteCursor cur{p};
    const std::uint64_t ndim = cur.u64();
    if (ndim == 0) {
        if (cur.pos != p.size()) throw std::runtime_error("checkpoint: malformed tensor '" + key + "'");
        return Tensor();
    }
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (auto& d : shape) {
        d = cur.u64();
        total *= d;
    }
    std::vector<double> data(total);
    for (auto& v : data) v = cur.f64();
    if (cur.pos != p.size()) throw std::runtime_error("checkpoint: malformed tensor '" + key + "'");
    return Tensor(std::move(shape), std::move(data));
}

void CheckpointReader::tensor_into(const std::string& key, Tensor& into) const {
    Tensor t = tensor(key);
    if (!t.same_shape(into))
        throw std::runtime_error("checkpoint: record '" + key + "' has shape " + t.shape_str() +
                                 ", expected " + into.shape_str());
    into = std::move(t);
}

std::string CheckpointReader::describe(const Entry& entry) const {
    switch (entry.type) {
        case RecordType::bytes:
            return "bytes[" + std::to_string(entry.payload_size) + "]";
        case RecordType::u64:
            return "u64 " + std::to_string(u64(entry.key));
        case RecordType::f64:
            return "f64 " + std::to_string(f64(entry.key));
        case RecordType::tensor:
            return "tensor " + tensor(entry.key).shape_str();
    }
    return "?";
}

}  // namespace dni
