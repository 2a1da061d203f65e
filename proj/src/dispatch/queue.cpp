#include <msync/dispatch/queue.hpp>

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

#include <msync/common/error.hpp>

namespace mxsync::dispatch {

using nlohmann::json;

std::string to_string(NotificationState s) {
    switch (s) {
        case NotificationState::pending: return "pending";
        case NotificationState::delivered: return "delivered";
        case NotificationState::dead: return "dead";
    }
    return "pending";
}

namespace {

NotificationState state_from_string(const std::string& s) {
    if (s == "delivered") return NotificationState::delivered;
    if (s == "dead") return NotificationState::dead;
    return NotificationState::pending;
}

json enq_frame(const Notification& n) {
    json j = {{"op", "enq"},   {"id", n.notification_id}, {"topic", n.topic},     {"sub", n.subscription_id},
              {"key", n.record_key}, {"payload", n.payload}, {"seq", n.seq}};
    if (n.attempts > 0) {
        j["attempts"] = n.attempts;
        j["due"] = n.next_due_ms;
    }
    return j;
}

}  // namespace

NotificationQueue::NotificationQueue(const std::filesystem::path& path, Options options)
    : options_(options), log_(path, {options.fsync}) {
    log_.replay([this](std::string_view frame) { apply(frame); });
    if (static_cast<std::size_t>(count(NotificationState::delivered) + count(NotificationState::dead)) >=
        options_.compact_threshold) {
        compact();
    }
}

void NotificationQueue::apply(std::string_view frame) {
    json j;
    try {
        j = json::parse(frame);
    } catch (const json::exception& e) {
        throw Error(Errc::corrupt_file, "unreadable queue frame in " + log_.path().string() + ": " + e.what());
    }
    const auto op = j.at("op").get<std::string>();
    const auto id = j.at("id").get<std::string>();
    if (op == "enq" || op == "seen") {
        Notification n;
        n.notification_id = id;
        n.topic = j.value("topic", "");
        n.subscription_id = j.value("sub", "");
        if (j.contains("key")) n.record_key = j["key"].get<EventId>();
        n.payload = j.value("payload", "");
        n.seq = j.value("seq", std::uint64_t{0});
        n.attempts = j.value("attempts", 0);
        n.next_due_ms = j.value("due", std::int64_t{0});
        n.state = op == "seen" ? state_from_string(j.at("state").get<std::string>()) : NotificationState::pending;
        next_seq_ = std::max(next_seq_, n.seq + 1);
        if (n.state == NotificationState::pending) pending_by_seq_[n.seq] = id;
        entries_[id] = std::move(n);
        return;
    }
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw Error(Errc::corrupt_file, "queue frame for unknown notification " + id + " in " + log_.path().string());
    }
    auto& n = it->second;
    n.attempts = j.value("attempts", n.attempts);
    if (op == "attempt") {
        n.next_due_ms = j.at("due").get<std::int64_t>();
        n.last_error = j.value("error", "");
        return;
    }
    pending_by_seq_.erase(n.seq);
    n.payload.clear();
    if (op == "ack") {
        n.state = NotificationState::delivered;
    } else if (op == "dead") {
        n.state = NotificationState::dead;
        n.last_error = j.value("error", "");
    } else {
        throw Error(Errc::corrupt_file, "unknown queue op " + op + " in " + log_.path().string());
    }
}

std::int64_t NotificationQueue::enqueue(std::span<const Notification> entries) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> frames;
    std::vector<Notification> fresh;
    std::unordered_set<std::string> batch_ids;
    std::int64_t present = 0;
    for (const auto& e : entries) {
        ++present;
        if (entries_.contains(e.notification_id) || !batch_ids.insert(e.notification_id).second) continue;
        Notification n = e;
        n.seq = next_seq_++;
        n.state = NotificationState::pending;
        n.attempts = 0;
        frames.push_back(enq_frame(n).dump());
        fresh.push_back(std::move(n));
    }
    if (!frames.empty()) log_.append(std::span<const std::string>(frames));
    for (auto& n : fresh) {
        pending_by_seq_[n.seq] = n.notification_id;
        entries_[n.notification_id] = std::move(n);
    }
    return present;
}

std::map<std::string, std::vector<Notification>> NotificationQueue::due(std::int64_t now) const {
    std::lock_guard lock(mutex_);
    std::map<std::string, std::vector<Notification>> out;
    for (const auto& [_, id] : pending_by_seq_) {
        const auto& n = entries_.at(id);
        if (n.next_due_ms <= now) out[n.subscription_id].push_back(n);
    }
    return out;
}

void NotificationQueue::ack(const std::string& notification_id) {
    std::lock_guard lock(mutex_);
    auto& n = entries_.at(notification_id);
    if (n.state != NotificationState::pending) return;
    log_.append(json{{"op", "ack"}, {"id", notification_id}, {"attempts", n.attempts + 1}}.dump());
    ++n.attempts;
    n.state = NotificationState::delivered;
    n.payload.clear();
    pending_by_seq_.erase(n.seq);
}

void NotificationQueue::record_failure(const std::string& notification_id, int attempts, std::int64_t next_due_ms,
                                       const std::string& error) {
    std::lock_guard lock(mutex_);
    auto& n = entries_.at(notification_id);
    if (n.state != NotificationState::pending) return;
    log_.append(json{{"op", "attempt"}, {"id", notification_id}, {"attempts", attempts}, {"due", next_due_ms},
                     {"error", error}}
                    .dump());
    n.attempts = attempts;
    n.next_due_ms = next_due_ms;
    n.last_error = error;
}

void NotificationQueue::mark_dead(const std::string& notification_id, int attempts, const std::string& error) {
    std::lock_guard lock(mutex_);
    auto& n = entries_.at(notification_id);
    if (n.state != NotificationState::pending) return;
    log_.append(json{{"op", "dead"}, {"id", notification_id}, {"attempts", attempts}, {"error", error}}.dump());
    n.attempts = attempts;
    n.state = NotificationState::dead;
    n.last_error = error;
    n.payload.clear();
    pending_by_seq_.erase(n.seq);
}

bool NotificationQueue::contains(const std::string& notification_id) const {
    std::lock_guard lock(mutex_);
    return entries_.contains(notification_id);
}

std::optional<Notification> NotificationQueue::get(const std::string& notification_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(notification_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::int64_t NotificationQueue::count(NotificationState state) const {
    std::lock_guard lock(mutex_);
    if (state == NotificationState::pending) return static_cast<std::int64_t>(pending_by_seq_.size());
    std::int64_t n = 0;
    for (const auto& [_, e] : entries_) n += e.state == state;
    return n;
}

std::optional<std::int64_t> NotificationQueue::next_due() const {
    std::lock_guard lock(mutex_);
    std::optional<std::int64_t> out;
    for (const auto& [_, id] : pending_by_seq_) {
        const auto due = entries_.at(id).next_due_ms;
        if (!out || due < *out) out = due;
    }
    return out;
}

void NotificationQueue::compact() {
    std::lock_guard lock(mutex_);
    std::vector<const Notification*> ordered;
    ordered.reserve(entries_.size());
    for (const auto& [_, n] : entries_) ordered.push_back(&n);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
    std::vector<std::string> frames;
    frames.reserve(ordered.size());
    for (const auto* n : ordered) {
        if (n->state == NotificationState::pending) {
            frames.push_back(enq_frame(*n).dump());
        } else {
            frames.push_back(json{{"op", "seen"},
                                  {"id", n->notification_id},
                                  {"state", to_string(n->state)},
                                  {"attempts", n->attempts},
                                  {"topic", n->topic},
                                  {"sub", n->subscription_id},
                                  {"key", n->record_key},
                                  {"seq", n->seq}}
                                 .dump());
        }
    }
    log_.rewrite(frames);
}

}  // namespace mxsync::dispatch
