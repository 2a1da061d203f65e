#include <msync/common/error.hpp>

namespace mxsync {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::unknown_chain: return "unknown_chain";
        case Errc::unknown_endpoint: return "unknown_endpoint";
        case Errc::unknown_registration: return "unknown_registration";
        case Errc::unknown_subscription: return "unknown_subscription";
        case Errc::unknown_job: return "unknown_job";
        case Errc::duplicate: return "duplicate";
        case Errc::empty_chain: return "empty_chain";
        case Errc::spork_range: return "spork_range";
        case Errc::incomplete_backfill: return "incomplete_backfill";
        case Errc::signature_mismatch: return "signature_mismatch";
        case Errc::malformed_payload: return "malformed_payload";
        case Errc::schema_error: return "schema_error";
        case Errc::coercion_error: return "coercion_error";
        case Errc::unknown_column: return "unknown_column";
        case Errc::malformed_cursor: return "malformed_cursor";
        case Errc::storage_io: return "storage_io";
        case Errc::corrupt_file: return "corrupt_file";
        case Errc::queue_unavailable: return "queue_unavailable";
    }
    return "unknown";
}

}  // namespace mxsync
