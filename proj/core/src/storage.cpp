#include "coml/storage.hpp"

#include "coml/errors.hpp"

#include <boost/crc.hpp>
#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

namespace coml {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_fail(const std::string& what) { throw Error(ErrorCode::Io, what + ": " + std::strerror(errno)); }

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
    boost::crc_32_type crc;
    crc.process_bytes(data.data(), data.size());
    return crc.checksum();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void write_all_fd(int fd, std::span<const std::uint8_t> data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("write");
        }
        off += static_cast<std::size_t>(n);
    }
}

void fsync_dir(const fs::path& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

std::atomic<std::uint64_t> g_temp_counter{0};

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_durably(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(g_temp_counter.fetch_add(1));
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("open " + tmp.string());
    try {
        write_all_fd(fd, bytes);
        if (::fsync(fd) != 0) io_fail("fsync " + tmp.string());
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) io_fail("rename " + path.string());
    fsync_dir(path.parent_path());
}

void write_file_durably(const fs::path& path, std::string_view text) {
    write_file_durably(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void append_durably(const fs::path& path, std::string_view text) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("open " + path.string());
    try {
        write_all_fd(fd, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        if (::fdatasync(fd) != 0) io_fail("fdatasync " + path.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

bool MemoryBlobStore::has(const Digest& d) const {
    std::lock_guard lock(mu_);
    return blobs_.contains(d);
}

void MemoryBlobStore::put(const Digest& d, std::span<const std::uint8_t> bytes) {
    std::lock_guard lock(mu_);
    blobs_.try_emplace(d, bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> MemoryBlobStore::get(const Digest& d) const {
    std::lock_guard lock(mu_);
    auto it = blobs_.find(d);
    if (it == blobs_.end()) return std::nullopt;
    return it->second;
}

void MemoryBlobStore::remove(const Digest& d) {
    std::lock_guard lock(mu_);
    blobs_.erase(d);
}

std::size_t MemoryBlobStore::size() const {
    std::lock_guard lock(mu_);
    return blobs_.size();
}

DirBlobStore::DirBlobStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path DirBlobStore::path_for(const Digest& d) const { return dir_ / (d.hex() + ".ppm"); }

bool DirBlobStore::has(const Digest& d) const { return fs::exists(path_for(d)); }

void DirBlobStore::put(const Digest& d, std::span<const std::uint8_t> bytes) {
    if (has(d)) return;
    write_file_durably(path_for(d), bytes);
}

std::optional<std::vector<std::uint8_t>> DirBlobStore::get(const Digest& d) const {
    fs::path p = path_for(d);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void DirBlobStore::remove(const Digest& d) {
    std::error_code ec;
    fs::remove(path_for(d), ec);
}

std::size_t DirBlobStore::size() const {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().extension() == ".ppm") ++n;
    }
    return n;
}

std::pair<std::unique_ptr<OpLogFile>, std::vector<DatasetOp>> OpLogFile::open(const fs::path& path) {
    std::vector<DatasetOp> ops;
    std::vector<std::uint8_t> bytes;
    if (fs::exists(path)) bytes = read_file_bytes(path);

    std::size_t good = 0;
    while (good + 4 <= bytes.size()) {
        std::uint32_t len = get_u32(bytes.data() + good);
        if (good + 4 + std::size_t{len} + 4 > bytes.size()) break;
        std::span<const std::uint8_t> payload(bytes.data() + good + 4, len);
        if (crc32_of(payload) != get_u32(bytes.data() + good + 4 + len)) break;
        auto j = nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false);
        if (j.is_discarded()) break;
        DatasetOp op;
        try {
            op = op_from_json(j);
        } catch (const Error&) {
            break;
        }
        if (op.seq != ops.size() + 1) break;
        ops.push_back(std::move(op));
        good += 4 + len + 4;
    }

    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("open " + path.string());
    if (good != bytes.size()) {
        if (::ftruncate(fd, static_cast<off_t>(good)) != 0) {
            ::close(fd);
            io_fail("truncate " + path.string());
        }
        ::fsync(fd);
    }
    if (::lseek(fd, static_cast<off_t>(good), SEEK_SET) < 0) {
        ::close(fd);
        io_fail("seek " + path.string());
    }
    fsync_dir(path.parent_path());
    return {std::unique_ptr<OpLogFile>(new OpLogFile(fd, good)), std::move(ops)};
}

OpLogFile::~OpLogFile() {
    if (fd_ >= 0) ::close(fd_);
}

void OpLogFile::append(const DatasetOp& op) {
    std::string text = to_json(op).dump();
    std::span<const std::uint8_t> payload(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
    std::vector<std::uint8_t> rec;
    rec.reserve(text.size() + 8);
    put_u32(rec, static_cast<std::uint32_t>(text.size()));
    rec.insert(rec.end(), payload.begin(), payload.end());
    put_u32(rec, crc32_of(payload));
    try {
        write_all_fd(fd_, rec);
        if (::fdatasync(fd_) != 0) io_fail("fdatasync op log");
    } catch (...) {
        // drop the partial record so later appends stay readable
        if (::ftruncate(fd_, static_cast<off_t>(size_)) == 0) ::lseek(fd_, static_cast<off_t>(size_), SEEK_SET);
        throw;
    }
    size_ += rec.size();
}

}  // namespace coml
