#include <msync/common/retry.hpp>

#include <algorithm>
#include <cmath>

#include <msync/common/error.hpp>

namespace mxsync {

std::int64_t RetryPolicy::backoff_ms(int failed_attempts) const {
    return static_cast<std::int64_t>(static_cast<double>(base_ms) * std::pow(factor, std::max(0, failed_attempts - 1)));
}

void from_json(const nlohmann::json& j, RetryPolicy& p) {
    p.base_ms = j.value("baseMs", p.base_ms);
    p.factor = j.value("factor", p.factor);
    p.max_attempts = j.value("maxAttempts", p.max_attempts);
    if (p.base_ms < 0) throw Error(Errc::invalid_argument, "retry.baseMs must be non-negative");
    if (p.factor < 1.0) throw Error(Errc::invalid_argument, "retry.factor must be at least 1");
    if (p.max_attempts < 1) throw Error(Errc::invalid_argument, "retry.maxAttempts must be positive");
}

void to_json(nlohmann::json& j, const RetryPolicy& p) {
    j = {{"baseMs", p.base_ms}, {"factor", p.factor}, {"maxAttempts", p.max_attempts}};
}

}  // namespace mxsync
