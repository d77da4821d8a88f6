#include "sae/trace.hpp"

#include "sae/errors.hpp"

namespace sae {

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::Wait: return "WAIT";
        case EventKind::Epoch: return "EPOCH";
        case EventKind::Publish: return "PUBLISH";
        case EventKind::Sleep: return "SLEEP";
        case EventKind::Wake: return "WAKE";
        case EventKind::Done: return "DONE";
    }
    return "?";
}

EventKind event_kind_from_name(const std::string& name) {
    if (name == "WAIT") return EventKind::Wait;
    if (name == "EPOCH") return EventKind::Epoch;
    if (name == "PUBLISH") return EventKind::Publish;
    if (name == "SLEEP") return EventKind::Sleep;
    if (name == "WAKE") return EventKind::Wake;
    if (name == "DONE") return EventKind::Done;
    throw TraceError("unknown event kind '" + name + "'");
}

std::int64_t monotonic_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace sae
