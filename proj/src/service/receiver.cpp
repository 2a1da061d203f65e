#include <msync/service/receiver.hpp>

#include <sstream>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::service {

using nlohmann::json;

Receiver::Receiver(Options options, ApiHandler api) : options_(std::move(options)), api_(std::move(api)) {
    if (options_.log_path.empty()) return;
    {
        std::ifstream in(options_.log_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception&) {
                break;  // torn final line
            }
            if (j.value("t", "") == "d") {
                accepted_[j.at("id").get<std::string>()] = j.value("eventType", "");
            } else if (j.value("t", "") == "f") {
                follow_ups_.push_back({j.at("id"), j.at("value"), j.at("results")});
            }
        }
    }
    log_.open(options_.log_path, std::ios::app);
    if (!log_) throw Error(Errc::storage_io, "cannot open receiver log " + options_.log_path.string());
}

void Receiver::log(const json& line) {
    if (!log_.is_open()) return;
    log_ << line.dump() << '\n';
    log_.flush();
}

bool Receiver::should_fail(const std::string& notification_id) {
    if (options_.failure_percent <= 0) return false;
    if (options_.failure_percent >= 100) return true;
    const int attempt = seen_[notification_id]++;
    std::string buf;
    append_field(buf, std::to_string(options_.seed));
    append_field(buf, options_.name);
    append_field(buf, notification_id);
    append_field(buf, std::to_string(attempt));
    const auto d = sha256(buf);
    const std::uint32_t roll = (std::uint32_t{d[0]} << 8 | d[1]) % 100;
    return static_cast<int>(roll) < options_.failure_percent;
}

dispatch::DeliveryResponse Receiver::handle(const std::string&, const std::string& body, const dispatch::Headers&) {
    json payload;
    try {
        payload = json::parse(body);
    } catch (const json::exception&) {
        std::lock_guard lock(mutex_);
        ++requests_;
        ++rejected_;
        return {400, {}};
    }
    const auto id = payload.value("notificationId", "");
    const auto type = payload.value("eventType", "");

    {
        std::lock_guard lock(mutex_);
        ++requests_;
        if (id.empty() || should_fail(id)) {
            ++rejected_;
            return {503, {}};
        }
        ++deliveries_;
        if (accepted_.contains(id)) return {200, {}};
    }

    std::vector<FollowUpRecord> performed;
    for (const auto& f : options_.follow_ups) {
        if (f.event_type != type) continue;
        const auto& columns = payload["columns"];
        if (!columns.contains(f.list_field) || !columns[f.list_field].is_string()) continue;
        std::stringstream list(columns[f.list_field].get<std::string>());
        std::string item;
        while (std::getline(list, item, ',')) {
            if (item.empty()) continue;
            json value = item;
            try {
                std::size_t used = 0;
                const auto n = std::stoll(item, &used);
                if (used == item.size()) value = n;
            } catch (const std::exception&) {
            }
            json spec = {{"eventTypes", {f.query_event_type}},
                         {"filters", {{{"column", f.match_column}, {"op", "="}, {"value", value}}}}};
            auto res = api_({"POST", "/v1/query", {}, spec.dump()});
            if (res.status != 200) return {503, {}};
            const auto result = json::parse(res.body);
            performed.push_back({id, item, static_cast<std::int64_t>(result.at("records").size())});
        }
    }

    std::lock_guard lock(mutex_);
    if (accepted_.contains(id)) return {200, {}};
    for (const auto& p : performed) {
        log({{"t", "f"}, {"id", p.notification_id}, {"value", p.value}, {"results", p.results}});
        follow_ups_.push_back(p);
    }
    log({{"t", "d"}, {"id", id}, {"eventType", type}});
    accepted_[id] = type;
    return {200, {}};
}

std::set<std::string> Receiver::notification_ids() const {
    std::lock_guard lock(mutex_);
    std::set<std::string> out;
    for (const auto& [id, _] : accepted_) out.insert(id);
    return out;
}

std::map<std::string, std::set<std::string>> Receiver::ids_by_type() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, std::set<std::string>> out;
    for (const auto& [id, type] : accepted_) out[type].insert(id);
    return out;
}

std::vector<FollowUpRecord> Receiver::follow_ups() const {
    std::lock_guard lock(mutex_);
    return follow_ups_;
}

std::int64_t Receiver::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::int64_t Receiver::rejected() const {
    std::lock_guard lock(mutex_);
    return rejected_;
}

std::int64_t Receiver::deliveries() const {
    std::lock_guard lock(mutex_);
    return deliveries_;
}

}  // namespace mxsync::service
