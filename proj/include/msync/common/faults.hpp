#pragma once

#include <functional>
#include <memory>
#include <string_view>

#include <msync/common/types.hpp>

namespace mxsync {

/// Test-only fault injection points. Each predicate returns true to silently
/// drop the event at that stage. on_stage is invoked at named pipeline points
/// so crash tests can kill the process at a chosen moment.
struct FaultHooks {
    std::function<bool(const EventId&)> drop_fetched;
    std::function<bool(const EventId&)> drop_persisted;
    std::function<bool(const EventId&)> drop_enqueued;
    std::function<void(std::string_view stage)> on_stage;
};

using FaultHooksPtr = std::shared_ptr<const FaultHooks>;

inline void fire_stage(const FaultHooksPtr& hooks, std::string_view stage) {
    if (hooks && hooks->on_stage) hooks->on_stage(stage);
}

}  // namespace mxsync
