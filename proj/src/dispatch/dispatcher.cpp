#include <msync/dispatch/dispatcher.hpp>

#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::dispatch {

using nlohmann::json;

void to_json(json& j, const WebhookSubscription& s) {
    j = {{"subscriptionId", s.subscription_id},
         {"registrationId", s.registration_id},
         {"url", s.url},
         {"active", s.active},
         {"createdAt", s.created_at}};
}

std::string notification_id(const EventId& record_key, const std::string& subscription_id) {
    std::string buf;
    append_field(buf, record_key.to_string());
    append_field(buf, subscription_id);
    return "n_" + sha256_hex(buf).substr(0, 40);
}

std::string notification_payload(const std::string& notification_id, const std::string& subscription_id,
                                  const store::MappedRecord& record) {
    json columns = json::object();
    for (const auto& [name, v] : record.columns) columns[name] = value_to_json(v);
    json body = {{"version", 1},
                 {"notificationId", notification_id},
                 {"subscriptionId", subscription_id},
                 {"eventType", record.event_type},
                 {"schemaId", record.schema_id},
                 {"chainId", record.record_key.chain_id},
                 {"recordKey", record.record_key},
                 {"blockTimestamp", record.block_timestamp},
                 {"columns", std::move(columns)}};
    return body.dump();
}

namespace {

std::string random_secret() {
    std::random_device rd;
    std::string raw(32, '\0');
    for (auto& c : raw) c = static_cast<char>(rd() & 0xff);
    return to_hex(raw);
}

}  // namespace

Dispatcher::Dispatcher(const std::filesystem::path& dir, const registry::Registry& registry,
                       integrity::Integrity& integrity, Transport& transport, const Clock& clock, Options options)
    : registry_(registry), integrity_(integrity), transport_(transport), clock_(clock), options_(std::move(options)),
      journal_(dir / "subscriptions.log", {options_.fsync}),
      queue_(dir / "queue.log", {.fsync = options_.fsync}),
      dead_path_(dir / "dead_letters.log") {
    journal_.replay([this](std::string_view frame) {
        json j;
        try {
            j = json::parse(frame);
        } catch (const json::exception& e) {
            throw Error(Errc::corrupt_file, "unreadable subscription record in " + journal_.path().string());
        }
        const auto op = j.at("op").get<std::string>();
        if (op == "subscribe") {
            WebhookSubscription s{j.at("subscriptionId"), j.at("registrationId"), j.at("url"), j.at("secret"), true,
                                  j.at("createdAt")};
            subs_[s.subscription_id] = std::move(s);
        } else if (op == "unsubscribe") {
            auto it = subs_.find(j.at("subscriptionId").get<std::string>());
            if (it != subs_.end()) it->second.active = false;
        }
    });
}

WebhookSubscription Dispatcher::subscribe(const std::string& registration_id, const std::string& url) {
    if (!registry_.contains(registration_id)) {
        throw Error(Errc::unknown_registration, "unknown registration " + registration_id);
    }
    if (!valid_url(url)) throw Error(Errc::invalid_argument, "malformed url " + url);

    std::lock_guard lock(mutex_);
    int generation = 0;
    for (const auto& [_, s] : subs_) {
        if (s.registration_id != registration_id || s.url != url) continue;
        if (s.active) {
            throw Error(Errc::duplicate, "subscription for " + url + " on " + registration_id + " exists: " +
                                             s.subscription_id);
        }
        ++generation;
    }
    std::string buf;
    append_field(buf, registration_id);
    append_field(buf, url);
    append_field(buf, std::to_string(generation));
    WebhookSubscription s{"sub_" + sha256_hex(buf).substr(0, 24), registration_id, url, random_secret(), true,
                          clock_.now_ms()};
    journal_.append(json{{"op", "subscribe"},
                         {"subscriptionId", s.subscription_id},
                         {"registrationId", s.registration_id},
                         {"url", s.url},
                         {"secret", s.secret},
                         {"createdAt", s.created_at}}
                        .dump());
    subs_[s.subscription_id] = s;
    return s;
}

void Dispatcher::unsubscribe(const std::string& subscription_id) {
    std::lock_guard lock(mutex_);
    auto it = subs_.find(subscription_id);
    if (it == subs_.end() || !it->second.active) {
        throw Error(Errc::unknown_subscription, "unknown subscription " + subscription_id);
    }
    journal_.append(json{{"op", "unsubscribe"}, {"subscriptionId", subscription_id}}.dump());
    it->second.active = false;
}

std::vector<WebhookSubscription> Dispatcher::subscriptions(const std::optional<std::string>& registration_id,
                                                           bool include_inactive) const {
    std::lock_guard lock(mutex_);
    std::vector<WebhookSubscription> out;
    for (const auto& [_, s] : subs_) {
        if (registration_id && s.registration_id != *registration_id) continue;
        if (!s.active && !include_inactive) continue;
        out.push_back(s);
    }
    return out;
}

std::optional<WebhookSubscription> Dispatcher::find_subscription(const std::string& subscription_id) const {
    std::lock_guard lock(mutex_);
    auto it = subs_.find(subscription_id);
    if (it == subs_.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, std::int64_t> Dispatcher::fanout() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, std::int64_t> out;
    for (const auto& [_, s] : subs_) {
        if (s.active) ++out[s.registration_id];
    }
    return out;
}

EnqueueResult Dispatcher::enqueue_notifications(const std::string& job_id,
                                                std::span<const store::MappedRecord> records) {
    std::map<std::string, std::vector<WebhookSubscription>> by_type;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [_, s] : subs_) {
            if (s.active) by_type[s.registration_id].push_back(s);
        }
    }

    EnqueueResult result;
    std::vector<Notification> batch;
    std::vector<std::pair<std::string, std::string>> unserializable;
    for (const auto& r : records) {
        auto it = by_type.find(r.event_type);
        if (it == by_type.end()) {
            result.fanout[r.event_type] = 0;
            continue;
        }
        result.fanout[r.event_type] = static_cast<std::int64_t>(it->second.size());
        if (options_.hooks && options_.hooks->drop_enqueued && options_.hooks->drop_enqueued(r.record_key)) continue;
        for (const auto& s : it->second) {
            Notification n;
            n.notification_id = notification_id(r.record_key, s.subscription_id);
            n.topic = r.event_type;
            n.subscription_id = s.subscription_id;
            n.record_key = r.record_key;
            try {
                n.payload = notification_payload(n.notification_id, s.subscription_id, r);
            } catch (const json::exception& e) {
                unserializable.emplace_back(n.notification_id, e.what());
            }
            batch.push_back(std::move(n));
        }
    }
    try {
        result.sent_count = queue_.enqueue(batch);
    } catch (const Error& e) {
        throw Error(Errc::queue_unavailable, "enqueue for job " + job_id + " failed: " + e.what());
    }
    for (const auto& [id, why] : unserializable) {
        auto n = queue_.get(id);
        if (n && n->state == NotificationState::pending) bury(*n, 0, "payload serialization failed: " + why);
    }
    return result;
}

void Dispatcher::bury(const Notification& n, int attempts, const std::string& error) {
    queue_.mark_dead(n.notification_id, attempts, error);
    json letter = {{"notificationId", n.notification_id},
                   {"subscriptionId", n.subscription_id},
                   {"registrationId", n.topic},
                   {"recordKey", n.record_key},
                   {"attempts", attempts},
                   {"error", error},
                   {"at", clock_.now_ms()}};
    {
        std::lock_guard lock(dead_mutex_);
        std::ofstream out(dead_path_, std::ios::app);
        out << letter.dump() << '\n';
    }
    integrity_.raise_alarm("dispatcher", "notification_dead", letter);
}

DeliveryStats Dispatcher::deliver_stream(const WebhookSubscription& sub, const std::vector<Notification>& batch) {
    DeliveryStats stats;
    for (const auto& n : batch) {
        ++stats.attempted;
        const int attempts = n.attempts + 1;
        const Headers headers = {{kSignatureHeader, "sha256=" + hmac_sha256_hex(sub.secret, n.payload)},
                                 {kNotificationHeader, n.notification_id}};
        DeliveryResponse res;
        try {
            res = transport_.post(sub.url, n.payload, headers);
        } catch (const std::exception& e) {
            res = {0, e.what()};
        }
        if (res.ok()) {
            queue_.ack(n.notification_id);
            fire_stage(options_.hooks, "delivery_acked");
            ++stats.delivered;
            continue;
        }
        const std::string error = res.status != 0 ? "status " + std::to_string(res.status) : res.error;
        if (attempts >= options_.retry.max_attempts) {
            bury(n, attempts, error);
            ++stats.dead;
        } else {
            queue_.record_failure(n.notification_id, attempts, clock_.now_ms() + options_.retry.backoff_ms(attempts),
                                  error);
            ++stats.failed;
        }
    }
    return stats;
}

DeliveryStats Dispatcher::deliver_due(WorkerPool* pool) {
    auto due = queue_.due(clock_.now_ms());
    std::vector<std::pair<WebhookSubscription, std::vector<Notification>>> streams;
    {
        std::lock_guard lock(mutex_);
        for (auto& [sub_id, batch] : due) {
            auto it = subs_.find(sub_id);
            if (it == subs_.end()) {
                for (const auto& n : batch) bury(n, n.attempts, "subscription " + sub_id + " not found");
                continue;
            }
            streams.emplace_back(it->second, std::move(batch));
        }
    }

    std::vector<DeliveryStats> results(streams.size());
    if (pool == nullptr || streams.size() < 2) {
        for (std::size_t i = 0; i < streams.size(); ++i) results[i] = deliver_stream(streams[i].first, streams[i].second);
    } else {
        std::vector<std::function<void()>> tasks;
        for (std::size_t i = 0; i < streams.size(); ++i) {
            tasks.emplace_back([&, i] { results[i] = deliver_stream(streams[i].first, streams[i].second); });
        }
        pool->run_all(std::move(tasks));
    }
    DeliveryStats total;
    for (const auto& r : results) {
        total.attempted += r.attempted;
        total.delivered += r.delivered;
        total.failed += r.failed;
        total.dead += r.dead;
    }
    return total;
}

std::vector<json> Dispatcher::dead_letters() const {
    std::lock_guard lock(dead_mutex_);
    std::vector<json> out;
    std::ifstream in(dead_path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception&) {
            break;
        }
    }
    return out;
}

}  // namespace mxsync::dispatch
