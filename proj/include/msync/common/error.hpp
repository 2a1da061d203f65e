#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mxsync {

enum class Errc {
    invalid_argument,
    unknown_chain,
    unknown_endpoint,
    unknown_registration,
    unknown_subscription,
    unknown_job,
    duplicate,
    empty_chain,
    spork_range,
    incomplete_backfill,
    signature_mismatch,
    malformed_payload,
    schema_error,
    coercion_error,
    unknown_column,
    malformed_cursor,
    storage_io,
    corrupt_file,
    queue_unavailable,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message) : std::runtime_error(message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

}  // namespace mxsync
