#include <msync/common/append_log.hpp>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <msync/common/error.hpp>

namespace mxsync {

namespace {

constexpr std::size_t kHeaderSize = 8;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

std::uint32_t crc_of(std::string_view payload) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

void frame_into(std::string& out, std::string_view record) {
    put_u32(out, static_cast<std::uint32_t>(record.size()));
    put_u32(out, crc_of(record));
    out.append(record);
}

[[noreturn]] void io_error(const std::filesystem::path& path, const char* what) {
    throw Error(Errc::storage_io, std::string(what) + " " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

AppendLog::AppendLog(std::filesystem::path path, Options options) : path_(std::move(path)), options_(options) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    open();
}

AppendLog::~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
}

void AppendLog::open() {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) io_error(path_, "cannot open");
    struct stat st {};
    if (::fstat(fd_, &st) != 0) io_error(path_, "cannot stat");
    size_ = static_cast<std::uint64_t>(st.st_size);
}

void AppendLog::replay(const std::function<void(std::string_view)>& fn) {
    std::lock_guard lock(mutex_);
    std::ifstream in(path_, std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    while (pos < data.size()) {
        if (data.size() - pos < kHeaderSize) break;
        const std::uint32_t len = get_u32(data.data() + pos);
        const std::uint32_t crc = get_u32(data.data() + pos + 4);
        if (data.size() - pos - kHeaderSize < len) break;
        const std::string_view payload(data.data() + pos + kHeaderSize, len);
        if (crc_of(payload) != crc) {
            if (pos + kHeaderSize + len < data.size()) {
                throw Error(Errc::corrupt_file, "corrupt record at offset " + std::to_string(pos) + " in " +
                                                    path_.string());
            }
            break;
        }
        fn(payload);
        pos += kHeaderSize + len;
    }

    if (pos < data.size()) {
        if (::ftruncate(fd_, static_cast<off_t>(pos)) != 0) io_error(path_, "cannot truncate torn tail of");
        size_ = pos;
    }
}

void AppendLog::write_all(const std::string& buffer) {
    std::size_t written = 0;
    while (written < buffer.size()) {
        const ssize_t n = ::write(fd_, buffer.data() + written, buffer.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            io_error(path_, "cannot write");
        }
        written += static_cast<std::size_t>(n);
    }
    if (options_.fsync && ::fdatasync(fd_) != 0) io_error(path_, "cannot sync");
    size_ += buffer.size();
}

void AppendLog::append(std::string_view record) {
    std::string buffer;
    buffer.reserve(record.size() + kHeaderSize);
    frame_into(buffer, record);
    std::lock_guard lock(mutex_);
    write_all(buffer);
}

void AppendLog::append(std::span<const std::string> records) {
    if (records.empty()) return;
    std::string buffer;
    for (const auto& r : records) frame_into(buffer, r);
    std::lock_guard lock(mutex_);
    write_all(buffer);
}

void AppendLog::rewrite(std::span<const std::string> records) {
    std::string buffer;
    for (const auto& r : records) frame_into(buffer, r);

    std::lock_guard lock(mutex_);
    auto tmp = path_;
    tmp += ".tmp";
    {
        const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (fd < 0) io_error(tmp, "cannot open");
        std::size_t written = 0;
        while (written < buffer.size()) {
            const ssize_t n = ::write(fd, buffer.data() + written, buffer.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                ::close(fd);
                io_error(tmp, "cannot write");
            }
            written += static_cast<std::size_t>(n);
        }
        if (options_.fsync) ::fsync(fd);
        ::close(fd);
    }
    std::filesystem::rename(tmp, path_);
    ::close(fd_);
    open();
}

std::uint64_t AppendLog::size_bytes() const {
    std::lock_guard lock(mutex_);
    return size_;
}

}  // namespace mxsync
