#pragma once

#include "reinvoke/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string_view>
#include <thread>

namespace reinvoke {

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};

    static RetryPolicy none() {
        return RetryPolicy{0, std::chrono::milliseconds{0}, 1.0, std::chrono::milliseconds{0}};
    }
};

/// Calls fn() until it succeeds. Transient ProviderError (including Timeout)
/// is retried up to policy.max_retries times with exponential backoff; any
/// other exception, AuthError included, propagates at once.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, std::string_view what, Fn&& fn) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const ProviderError& e) {
            if (!e.transient() || attempt >= policy.max_retries) throw;
            spdlog::warn("{}: attempt {} failed ({}), retrying in {} ms", what, attempt + 1, e.what(),
                         backoff.count());
        }
        std::this_thread::sleep_for(backoff);
        auto next = static_cast<double>(backoff.count()) * policy.multiplier;
        backoff = std::min(policy.max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(next)));
    }
}

}  // namespace reinvoke
