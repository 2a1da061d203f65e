#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>

namespace mxsync {

/// Append-only file of CRC-framed records.
///
/// Frame layout: u32 little-endian payload length, u32 little-endian CRC-32 of
/// the payload, payload bytes. A truncated or checksum-failing final frame is
/// a torn write from an interrupted append and is cut off during replay; a bad
/// frame followed by further data is corruption and replay refuses to continue.
class AppendLog {
  public:
    struct Options {
        bool fsync{true};
    };

    AppendLog(std::filesystem::path path, Options options);
    ~AppendLog();

    AppendLog(const AppendLog&) = delete;
    AppendLog& operator=(const AppendLog&) = delete;

    /// Invokes fn for every intact frame in file order. Throws
    /// Error(corrupt_file) naming the file when the log is damaged mid-file.
    void replay(const std::function<void(std::string_view)>& fn);

    void append(std::string_view record);
    /// Writes all records with a single write call and at most one fsync.
    void append(std::span<const std::string> records);

    /// Atomically replaces the file content (temp file + rename).
    void rewrite(std::span<const std::string> records);

    [[nodiscard]] std::uint64_t size_bytes() const;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

  private:
    void open();
    void write_all(const std::string& buffer);

    std::filesystem::path path_;
    Options options_;
    int fd_{-1};
    std::uint64_t size_{0};
    mutable std::mutex mutex_;
};

}  // namespace mxsync
