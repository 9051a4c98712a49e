#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "trace.hpp"
#include "types.hpp"

namespace mpsim {

enum class ThreadState : std::uint8_t {
    Running,
    Ready,
    Suspended,
    BlockedOnReceive,
    Terminated,  // general-protection verdicts stop the thread
};

enum class Role : std::uint8_t { Applicant, Pager, RegionMapper, KernelInternal };

enum class CpuMode : std::uint8_t { User, Kernel };

struct FaultPayload {
    Vaddr vaddr = 0;
    AccessType access = AccessType::Read;
    Tid faulter = kNoThread;
    Asid asid{0};
    Marker marker = 0;

    bool operator==(const FaultPayload&) const = default;
};

struct Message {
    Tid sender = kNoThread;
    Tid receiver = kNoThread;
    MessageKind kind = MessageKind::PageFault;
    FaultPayload payload;
    CycleId cycle = kNoCycle;
};

struct ThreadControlBlock {
    Tid tid = kNoThread;
    Asid asid{0};
    ThreadState state = ThreadState::Ready;
    Role role = Role::Applicant;

    // Privilege level the thread resumes in when it next gets the CPU. A
    // thread preempted between its fault trap and the dispatch step resumes
    // in kernel mode.
    CpuMode saved_mode = CpuMode::User;

    std::deque<Message> inbox;
    bool head_delivered = false;  // inbox.front() already handed to the thread
};

// Picks the next thread among eligible candidates. Deterministic mode follows
// a scripted order; seeded round-robin rotates through candidates starting at
// a seed-derived offset.
class Scheduler {
public:
    static Scheduler deterministic(std::vector<Tid> order);
    static Scheduler seeded_round_robin(std::uint64_t seed);

    bool is_deterministic() const noexcept { return deterministic_; }

    // `candidates` is sorted by tid and non-empty.
    Tid pick(std::span<const Tid> candidates);

    // Appends to the scripted order (deterministic mode only).
    void push(Tid tid);

private:
    Scheduler() = default;

    bool deterministic_ = true;
    std::deque<Tid> order_;
    std::mt19937_64 rng_;
    std::optional<Tid> last_;
};

// Single-CPU discrete-event engine. Owns the thread table and the trace, and
// implements the privilege/occupancy accounting every scheme shares:
//   - every user<->kernel transition emits exactly one mode-switch event;
//   - a context switch is emitted only when the CPU owner changes.
class Engine {
public:
    void add_thread(Tid tid, Asid asid, Role role,
                    ThreadState initial = ThreadState::Ready);
    bool has_thread(Tid tid) const { return threads_.contains(tid); }
    const ThreadControlBlock& thread(Tid tid) const;
    ThreadControlBlock& thread(Tid tid);
    const std::map<Tid, ThreadControlBlock>& threads() const noexcept { return threads_; }

    // Last thread that held the CPU (it may since have blocked).
    Tid cpu_owner() const noexcept { return owner_; }
    CpuMode cpu_mode() const noexcept { return mode_; }

    Tid schedule_next(Scheduler& scheduler,
                      const std::function<bool(Tid)>& eligible = {});

    // Gives the CPU to `tid` regardless of its run state (used for server
    // threads woken by the kernel). Events are unattributed.
    void switch_to(Tid tid);

    // Kernel entry by the CPU owner; no event if already in kernel mode.
    void enter_kernel(CycleId cycle);

    // Kernel exit into `tid`: MODE_K2U followed by CTX when the owner changes.
    void return_to_user(Tid tid, CycleId cycle);

    // Synchronous rendezvous send. A kernel-generated page-fault message names
    // the (already suspended) faulter as sender.
    void send_sync(const Message& msg);

    // Hands the queued head message to `tid`, switching to it if needed.
    // Returns the message; the caller processes and then retires it.
    const Message& deliver_head(Tid tid);
    void retire_head(Tid tid);

    void suspend(Tid tid, CycleId cycle);
    void resume(Tid tid, CycleId cycle);
    void block_on_receive(Tid tid);
    void terminate(Tid tid);

    void append_trace(TraceEvent ev) { trace_.append(ev); }
    const Trace& trace() const noexcept { return trace_; }
    Trace& trace() noexcept { return trace_; }

private:
    void emit_mode(EventKind kind, Tid tid, CycleId cycle);
    void preempt_owner();
    void give_cpu(Tid tid, CycleId cycle);

    std::map<Tid, ThreadControlBlock> threads_;
    Tid owner_ = kNoThread;
    CpuMode mode_ = CpuMode::Kernel;
    Trace trace_;
};

std::string_view to_string(ThreadState state) noexcept;
std::string_view to_string(Role role) noexcept;

}  // namespace mpsim
