#pragma once

#include <cstdint>

#include <json.hpp>

namespace mxsync {

/// Exponential backoff with a bounded attempt count.
struct RetryPolicy {
    std::int64_t base_ms{1000};
    double factor{2.0};
    int max_attempts{5};

    /// Wait before the next attempt after `failed_attempts` failures.
    [[nodiscard]] std::int64_t backoff_ms(int failed_attempts) const;
};

void from_json(const nlohmann::json& j, RetryPolicy& p);
void to_json(nlohmann::json& j, const RetryPolicy& p);

}  // namespace mxsync
