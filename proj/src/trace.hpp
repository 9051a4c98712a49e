#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace mpsim {

enum class EventKind : std::uint8_t {
    ModeSwitchUserToKernel,
    ModeSwitchKernelToUser,
    ContextSwitch,
    IpcSend,
    IpcReceive,
    Suspend,
    Resume,
    MapPage,
    UnmapPage,
    Verdict,
};

enum class MessageKind : std::uint8_t { PageFault, Reflection, Reply };

// Stable spellings used in trace lines and scenario expectations.
enum class VerdictCode : std::uint8_t {
    Dispatched,
    ResumedPresent,
    KernelRange,
    NoPager,
    NotAccepted,
};

// One accounting event. Only the fields relevant to `kind` are meaningful;
// the text form prints exactly those, in a fixed order.
//
// `cycle` attributes the event to a fault-handling cycle (the index of the
// fault in trap order) or kNoCycle for scheduler activity and pager
// housekeeping. Per-cycle metrics count attributed events only.
struct TraceEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Verdict;
    CycleId cycle = kNoCycle;

    Tid tid = kNoThread;   // subject thread; sender for IPC; `from` for CTX
    Tid peer = kNoThread;  // receiver for IPC; `to` for CTX; pager for verdicts

    MessageKind message = MessageKind::PageFault;
    Tid faulter = kNoThread;
    Asid asid{0};
    Vaddr vaddr = 0;
    AccessType access = AccessType::Read;
    Frame frame = 0;
    Marker marker = 0;
    bool revoke = false;
    VerdictCode verdict = VerdictCode::Dispatched;

    bool operator==(const TraceEvent&) const = default;
};

class Trace {
public:
    Trace() = default;
    // Takes events as they are, sequence numbers included.
    explicit Trace(std::vector<TraceEvent> events) : events_(std::move(events)) {}

    // Stamps the event with the next sequence number and returns it.
    std::uint64_t append(TraceEvent ev);

    std::span<const TraceEvent> events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }
    const TraceEvent& operator[](std::size_t i) const { return events_.at(i); }

    // One event per line: `seq KIND key=value...`.
    std::string to_text() const;

private:
    std::vector<TraceEvent> events_;
};

std::string format_event(const TraceEvent& ev);

std::string_view to_string(EventKind kind) noexcept;
std::string_view to_string(MessageKind kind) noexcept;
std::string_view to_string(VerdictCode code) noexcept;
std::string_view to_string(AccessType access) noexcept;

bool parse_verdict_code(std::string_view text, VerdictCode& out) noexcept;

std::string hex32(Vaddr v);

}  // namespace mpsim
