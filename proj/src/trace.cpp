#include "trace.hpp"

#include <array>
#include <cstdio>

namespace mpsim {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Deadlock: return "Deadlock";
        case ErrorCode::NotRunnable: return "NotRunnable";
        case ErrorCode::UnknownReceiver: return "UnknownReceiver";
        case ErrorCode::MarkerOverflow: return "MarkerOverflow";
        case ErrorCode::BadAddress: return "BadAddress";
        case ErrorCode::NotMapped: return "NotMapped";
        case ErrorCode::BadRegion: return "BadRegion";
        case ErrorCode::NoOutstandingFault: return "NoOutstandingFault";
        case ErrorCode::WrongPager: return "WrongPager";
        case ErrorCode::OutOfFrames: return "OutOfFrames";
        case ErrorCode::NoDatabaseEntry: return "NoDatabaseEntry";
        case ErrorCode::OverlappingRange: return "OverlappingRange";
        case ErrorCode::SchemeMismatch: return "SchemeMismatch";
        case ErrorCode::IncompleteCycle: return "IncompleteCycle";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SemanticError: return "SemanticError";
        case ErrorCode::MissingFixture: return "MissingFixture";
        case ErrorCode::Livelock: return "Livelock";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

std::uint64_t Trace::append(TraceEvent ev) {
    ev.seq = events_.size();
    events_.push_back(ev);
    return ev.seq;
}

std::string Trace::to_text() const {
    std::string out;
    out.reserve(events_.size() * 48);
    for (const auto& ev : events_) {
        out += format_event(ev);
        out += '\n';
    }
    return out;
}

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::ModeSwitchUserToKernel: return "MODE_U2K";
        case EventKind::ModeSwitchKernelToUser: return "MODE_K2U";
        case EventKind::ContextSwitch: return "CTX";
        case EventKind::IpcSend: return "IPC_SEND";
        case EventKind::IpcReceive: return "IPC_RECV";
        case EventKind::Suspend: return "SUSPEND";
        case EventKind::Resume: return "RESUME";
        case EventKind::MapPage: return "MAP";
        case EventKind::UnmapPage: return "UNMAP";
        case EventKind::Verdict: return "VERDICT";
    }
    return "?";
}

std::string_view to_string(MessageKind kind) noexcept {
    switch (kind) {
        case MessageKind::PageFault: return "PAGE_FAULT";
        case MessageKind::Reflection: return "REFLECTION";
        case MessageKind::Reply: return "REPLY";
    }
    return "?";
}

namespace {
constexpr std::array<std::pair<VerdictCode, std::string_view>, 5> kVerdictNames{{
    {VerdictCode::Dispatched, "DISPATCHED"},
    {VerdictCode::ResumedPresent, "RESUMED_PRESENT"},
    {VerdictCode::KernelRange, "KERNEL_RANGE"},
    {VerdictCode::NoPager, "NO_PAGER"},
    {VerdictCode::NotAccepted, "NOT_ACCEPTED"},
}};

std::string tid_text(Tid t) {
    return t == kNoThread ? std::string("-") : std::to_string(raw(t));
}

std::string cycle_text(CycleId c) {
    return c == kNoCycle ? std::string("-") : std::to_string(c);
}
}  // namespace

std::string_view to_string(VerdictCode code) noexcept {
    for (const auto& [c, name] : kVerdictNames) {
        if (c == code) return name;
    }
    return "?";
}

bool parse_verdict_code(std::string_view text, VerdictCode& out) noexcept {
    for (const auto& [c, name] : kVerdictNames) {
        if (name == text) {
            out = c;
            return true;
        }
    }
    return false;
}

std::string_view to_string(AccessType access) noexcept {
    return access == AccessType::Read ? "R" : "W";
}

std::string hex32(Vaddr v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%08llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_event(const TraceEvent& ev) {
    std::string line = std::to_string(ev.seq);
    line += ' ';
    line += to_string(ev.kind);
    auto kv = [&line](std::string_view key, const std::string& value) {
        line += ' ';
        line += key;
        line += '=';
        line += value;
    };
    switch (ev.kind) {
        case EventKind::ModeSwitchUserToKernel:
        case EventKind::ModeSwitchKernelToUser:
        case EventKind::Suspend:
        case EventKind::Resume:
            kv("tid", tid_text(ev.tid));
            break;
        case EventKind::ContextSwitch:
            kv("from", tid_text(ev.tid));
            kv("to", tid_text(ev.peer));
            break;
        case EventKind::IpcSend:
            kv("from", tid_text(ev.tid));
            kv("to", tid_text(ev.peer));
            kv("msg", std::string(to_string(ev.message)));
            kv("faulter", tid_text(ev.faulter));
            kv("vaddr", hex32(ev.vaddr));
            kv("access", std::string(to_string(ev.access)));
            kv("marker", std::to_string(ev.marker));
            break;
        case EventKind::IpcReceive:
            kv("tid", tid_text(ev.tid));
            kv("msg", std::string(to_string(ev.message)));
            kv("faulter", tid_text(ev.faulter));
            break;
        case EventKind::MapPage:
            kv("asid", std::to_string(raw(ev.asid)));
            kv("vaddr", hex32(ev.vaddr));
            kv("frame", std::to_string(ev.frame));
            kv("marker", std::to_string(ev.marker));
            break;
        case EventKind::UnmapPage:
            kv("asid", std::to_string(raw(ev.asid)));
            kv("vaddr", hex32(ev.vaddr));
            kv("revoke", ev.revoke ? "1" : "0");
            break;
        case EventKind::Verdict:
            kv("tid", tid_text(ev.tid));
            kv("vaddr", hex32(ev.vaddr));
            kv("access", std::string(to_string(ev.access)));
            kv("verdict", std::string(to_string(ev.verdict)));
            kv("pager", tid_text(ev.peer));
            break;
    }
    kv("cycle", cycle_text(ev.cycle));
    return line;
}

}  // namespace mpsim
