// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dni/tensor.hpp"

namespace dni {

/// Record payload kinds of the checkpoint container.
enum class RecordType : std::uint8_t { bytes = 0, u64 = 1, f64 = 2, tensor = 3 };

/// Length-prefixed binary container: an 8-byte magic, a format version, and a
/// sequence of named, typed records. Keys are unique; insertion order is
/// preserved so files are byte-stable for identical state.
class CheckpointWriter {
  public:
    void put_bytes(const std::string& key, const std::string& value);
    void put_u64(const std::string& key, std::uint64_t value);
    void put_f64(const std::string& key, double value);
    /// Tensors round-trip exactly (shape plus raw IEEE-754 payload). Empty
    /// tensors are legal and restore as default-constructed.
    void put_tensor(const std::string& key, const Tensor& value);

    void save(const std::string& path) const;
    std::vector<std::uint8_t> to_bytes() const;

  private:
    struct Record {
        std::string key;
        RecordType type;
        std::vector<std::uint8_t> payload;
    };
    void add(const std::string& key, RecordType type, std::vector<std::uint8_t> payload);

    std::vector<Record> records_;
    std::map<std::string, std::size_t> index_;
};

class CheckpointReader {
  public:
    struct Entry {
        std::string key;
        RecordType type;
        std::uint64_t payload_size = 0;
    };

    /// Throws std::runtime_error on a bad magic, an unsupported version, a
    /// duplicate key, or a truncated file.
    static CheckpointReader load(const std::string& path);
    static CheckpointReader from_bytes(const std::vector<std::uint8_t>& bytes);

    bool has(const std::string& key) const;
    std::string bytes(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    double f64(const std::string& key) const;
    Tensor tensor(const std::string& key) const;
    /// Loads a tensor whose shape must match the destination exactly, for
    /// restoring into a freshly constructed model.
    void tensor_into(const std::string& key, Tensor& into) const;

    const std::vector<Entry>& entries() const { return entries_; }
    /// Human-readable payload summary ("u64 7", "tensor [3 x 4]", ...).
    std::string describe(const Entry& entry) const;
    std::uint32_t version() const { return version_; }

    static constexpr std::uint32_t kVersion = 1;

  private:
    const std::vector<std::uint8_t>& payload(const std::string& key, RecordType want) const;

    std::uint32_t version_ = 0;
    std::vector<Entry> entries_;
    std::map<std::string, std::pair<RecordType, std::vector<std::uint8_t>>> records_;
};

}  // namespace dni
