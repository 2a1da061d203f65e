#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/common/faults.hpp>

namespace mxsync::service {

class Service;
class Receiver;

/// Kill the process with SIGKILL the `occurrence`-th time `stage` is reached
/// during tick `tick`.
struct KillPoint {
    std::int64_t tick{0};
    std::string stage;
    int occurrence{1};
};

struct ScenarioOptions {
    std::filesystem::path data_dir;
    std::optional<KillPoint> kill;
    std::optional<std::size_t> workers;
    /// Extra fault hooks (drop predicates) applied to the service.
    FaultHooksPtr hooks;
    /// Called after assertions, before the service shuts down.
    std::function<void(Service&, const std::map<std::string, const Receiver*>&)> inspect;
};

struct AssertionResult {
    std::size_t index{0};
    std::string type;
    bool passed{false};
    std::string detail;
};

struct ScenarioReport {
    bool passed{true};
    std::vector<AssertionResult> assertions;
    std::optional<std::size_t> first_failure;
    std::int64_t ticks{0};
    std::int64_t resumed_from{-1};
    /// Comparable end state: store digest, cursors, receiver sets.
    nlohmann::json state;
};

/// Stage names reported by the runner and the pipeline, usable as kill points.
const std::vector<std::string>& scenario_stages();

/// Throws Error(invalid_argument) naming the problem.
void validate_scenario(const nlohmann::json& scenario);
nlohmann::json load_scenario(const std::filesystem::path& path);

/// Runs a scenario on a virtual clock in `options.data_dir`. A directory left
/// behind by an interrupted run is resumed: chain actions of finished ticks
/// are replayed and the interrupted tick runs again.
ScenarioReport run_scenario(const nlohmann::json& scenario, const ScenarioOptions& options);

nlohmann::json report_to_json(const ScenarioReport& report);
std::string format_report(const ScenarioReport& report);

}  // namespace mxsync::service
