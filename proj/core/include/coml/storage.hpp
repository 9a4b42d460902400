#pragma once

#include "coml/hash.hpp"
#include "coml/ops.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace coml {

/// Content-addressed storage for canonical PPM bytes.
class BlobStore {
public:
    virtual ~BlobStore() = default;
    virtual bool has(const Digest& d) const = 0;
    /// Stores `bytes` under `d`; storing an existing digest is a no-op.
    virtual void put(const Digest& d, std::span<const std::uint8_t> bytes) = 0;
    virtual std::optional<std::vector<std::uint8_t>> get(const Digest& d) const = 0;
    virtual void remove(const Digest& d) = 0;
    virtual std::size_t size() const = 0;
};

class MemoryBlobStore final : public BlobStore {
public:
    bool has(const Digest& d) const override;
    void put(const Digest& d, std::span<const std::uint8_t> bytes) override;
    std::optional<std::vector<std::uint8_t>> get(const Digest& d) const override;
    void remove(const Digest& d) override;
    std::size_t size() const override;

private:
    mutable std::mutex mu_;
    std::map<Digest, std::vector<std::uint8_t>> blobs_;
};

/// One file per blob, "<hex>.ppm", written via temp file + fsync + rename.
class DirBlobStore final : public BlobStore {
public:
    explicit DirBlobStore(std::filesystem::path dir);

    bool has(const Digest& d) const override;
    void put(const Digest& d, std::span<const std::uint8_t> bytes) override;
    std::optional<std::vector<std::uint8_t>> get(const Digest& d) const override;
    void remove(const Digest& d) override;
    std::size_t size() const override;

private:
    std::filesystem::path path_for(const Digest& d) const;
    std::filesystem::path dir_;
};

/// Append-only log of sequenced ops. Each record is
/// [u32 BE length][JSON op][u32 BE crc32 of the JSON]; append() returns only
/// after the record is fsync'd.
class OpLogFile {
public:
    /// Opens (creating if needed) and returns every intact record. A torn or
    /// corrupt tail is truncated away.
    static std::pair<std::unique_ptr<OpLogFile>, std::vector<DatasetOp>> open(const std::filesystem::path& path);

    ~OpLogFile();
    OpLogFile(const OpLogFile&) = delete;
    OpLogFile& operator=(const OpLogFile&) = delete;

    void append(const DatasetOp& op);

private:
    OpLogFile(int fd, std::size_t size) : fd_(fd), size_(size) {}
    int fd_;
    std::size_t size_;
};

/// Writes `bytes` to `path` atomically (temp file, fsync, rename, dir fsync).
void write_file_durably(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_durably(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Appends `text` to `path` (creating it) and fdatasyncs before returning.
void append_durably(const std::filesystem::path& path, std::string_view text);

}  // namespace coml
