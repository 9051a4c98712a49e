#include "sim_core.hpp"

#include <algorithm>

namespace mpsim {

Scheduler Scheduler::deterministic(std::vector<Tid> order) {
    Scheduler s;
    s.deterministic_ = true;
    s.order_.assign(order.begin(), order.end());
    return s;
}

Scheduler Scheduler::seeded_round_robin(std::uint64_t seed) {
    Scheduler s;
    s.deterministic_ = false;
    s.rng_.seed(seed);
    return s;
}

void Scheduler::push(Tid tid) {
    if (!deterministic_) {
        throw SimError(ErrorCode::InvalidArgument,
                       "cannot script a seeded round-robin scheduler");
    }
    order_.push_back(tid);
}

Tid Scheduler::pick(std::span<const Tid> candidates) {
    if (deterministic_) {
        if (order_.empty()) {
            throw SimError(ErrorCode::NotRunnable, "scheduler order exhausted");
        }
        const Tid next = order_.front();
        if (std::find(candidates.begin(), candidates.end(), next) == candidates.end()) {
            throw SimError(ErrorCode::NotRunnable,
                           "thread " + std::to_string(raw(next)) + " is not runnable");
        }
        order_.pop_front();
        return next;
    }
    Tid chosen;
    if (!last_) {
        chosen = candidates[rng_() % candidates.size()];
    } else {
        auto it = std::upper_bound(candidates.begin(), candidates.end(), *last_);
        chosen = it == candidates.end() ? candidates.front() : *it;
    }
    last_ = chosen;
    return chosen;
}

void Engine::add_thread(Tid tid, Asid asid, Role role, ThreadState initial) {
    if (tid == kNoThread) {
        throw SimError(ErrorCode::InvalidArgument, "thread id 0 is reserved");
    }
    if (threads_.contains(tid)) {
        throw SimError(ErrorCode::InvalidArgument,
                       "duplicate thread " + std::to_string(raw(tid)));
    }
    ThreadControlBlock tcb;
    tcb.tid = tid;
    tcb.asid = asid;
    tcb.role = role;
    tcb.state = initial == ThreadState::Running ? ThreadState::Ready : initial;
    threads_.emplace(tid, std::move(tcb));
}

const ThreadControlBlock& Engine::thread(Tid tid) const {
    auto it = threads_.find(tid);
    if (it == threads_.end()) {
        throw SimError(ErrorCode::InvalidArgument,
                       "unknown thread " + std::to_string(raw(tid)));
    }
    return it->second;
}

ThreadControlBlock& Engine::thread(Tid tid) {
    return const_cast<ThreadControlBlock&>(std::as_const(*this).thread(tid));
}

void Engine::emit_mode(EventKind kind, Tid tid, CycleId cycle) {
    TraceEvent ev;
    ev.kind = kind;
    ev.tid = tid;
    ev.cycle = cycle;
    trace_.append(ev);
}

Tid Engine::schedule_next(Scheduler& scheduler, const std::function<bool(Tid)>& eligible) {
    std::vector<Tid> runnable;
    for (const auto& [tid, tcb] : threads_) {
        const bool running = tcb.state == ThreadState::Running && tid == owner_;
        if (running || tcb.state == ThreadState::Ready) runnable.push_back(tid);
    }
    if (runnable.empty()) {
        throw SimError(ErrorCode::Deadlock, "no thread is ready or running");
    }
    std::vector<Tid> candidates;
    for (Tid t : runnable) {
        if (!eligible || eligible(t)) candidates.push_back(t);
    }
    if (candidates.empty()) {
        throw SimError(ErrorCode::NotRunnable, "no eligible thread is runnable");
    }
    const Tid next = scheduler.pick(candidates);
    give_cpu(next, kNoCycle);
    return next;
}

void Engine::switch_to(Tid tid) {
    auto& t = thread(tid);
    if (t.state == ThreadState::Terminated || t.state == ThreadState::Suspended) {
        throw SimError(ErrorCode::NotRunnable,
                       "thread " + std::to_string(raw(tid)) + " cannot run");
    }
    give_cpu(tid, kNoCycle);
}

void Engine::preempt_owner() {
    if (owner_ == kNoThread) return;
    auto& cur = thread(owner_);
    if (cur.state == ThreadState::Running) {
        cur.saved_mode = mode_;
        cur.state = ThreadState::Ready;
    }
    if (mode_ == CpuMode::User) {
        emit_mode(EventKind::ModeSwitchUserToKernel, owner_, kNoCycle);
        mode_ = CpuMode::Kernel;
    }
}

void Engine::give_cpu(Tid tid, CycleId cycle) {
    auto& t = thread(tid);
    if (owner_ == tid) {
        t.state = ThreadState::Running;
        return;
    }
    preempt_owner();
    if (t.saved_mode == CpuMode::User) {
        return_to_user(tid, cycle);
        return;
    }
    TraceEvent ev;
    ev.kind = EventKind::ContextSwitch;
    ev.tid = owner_;
    ev.peer = tid;
    ev.cycle = cycle;
    trace_.append(ev);
    owner_ = tid;
    t.state = ThreadState::Running;
    mode_ = CpuMode::Kernel;
}

void Engine::enter_kernel(CycleId cycle) {
    if (mode_ == CpuMode::Kernel) return;
    emit_mode(EventKind::ModeSwitchUserToKernel, owner_, cycle);
    mode_ = CpuMode::Kernel;
    if (owner_ != kNoThread) thread(owner_).saved_mode = CpuMode::Kernel;
}

void Engine::return_to_user(Tid tid, CycleId cycle) {
    auto& t = thread(tid);
    if (mode_ != CpuMode::Kernel) {
        throw SimError(ErrorCode::InvalidArgument, "return to user while in user mode");
    }
    emit_mode(EventKind::ModeSwitchKernelToUser, tid, cycle);
    if (owner_ != tid) {
        if (owner_ != kNoThread) {
            auto& cur = thread(owner_);
            if (cur.state == ThreadState::Running) {
                cur.state = ThreadState::Ready;
                cur.saved_mode = CpuMode::Kernel;
            }
        }
        TraceEvent ev;
        ev.kind = EventKind::ContextSwitch;
        ev.tid = owner_;
        ev.peer = tid;
        ev.cycle = cycle;
        trace_.append(ev);
        owner_ = tid;
    }
    t.state = ThreadState::Running;
    t.saved_mode = CpuMode::User;
    mode_ = CpuMode::User;
}

void Engine::send_sync(const Message& msg) {
    if (!has_thread(msg.receiver)) {
        throw SimError(ErrorCode::UnknownReceiver,
                       "unknown receiver " + std::to_string(raw(msg.receiver)));
    }
    if (msg.kind == MessageKind::PageFault &&
        thread(msg.payload.faulter).state != ThreadState::Suspended) {
        throw SimError(ErrorCode::InvalidArgument,
                       "page-fault message for a thread that is not suspended");
    }
    enter_kernel(msg.cycle);

    TraceEvent ev;
    ev.kind = EventKind::IpcSend;
    ev.tid = msg.sender;
    ev.peer = msg.receiver;
    ev.message = msg.kind;
    ev.faulter = msg.payload.faulter;
    ev.asid = msg.payload.asid;
    ev.vaddr = msg.payload.vaddr;
    ev.access = msg.payload.access;
    ev.marker = msg.payload.marker;
    ev.cycle = msg.cycle;
    trace_.append(ev);

    auto& receiver = thread(msg.receiver);
    const bool user_sender = msg.sender != kNoThread && has_thread(msg.sender) &&
                             msg.sender != msg.payload.faulter;

    if (msg.kind == MessageKind::Reply) {
        if (receiver.state != ThreadState::Suspended) {
            throw SimError(ErrorCode::InvalidArgument, "reply target is not suspended");
        }
        if (user_sender) block_on_receive(msg.sender);
        resume(msg.receiver, msg.cycle);
        return_to_user(msg.receiver, msg.cycle);
        return;
    }

    if (user_sender) block_on_receive(msg.sender);
    receiver.inbox.push_back(msg);
    if (receiver.state == ThreadState::BlockedOnReceive && receiver.inbox.size() == 1) {
        receiver.head_delivered = true;
        return_to_user(msg.receiver, msg.cycle);
    }
}

const Message& Engine::deliver_head(Tid tid) {
    auto& t = thread(tid);
    if (t.inbox.empty()) {
        throw SimError(ErrorCode::InvalidArgument,
                       "thread " + std::to_string(raw(tid)) + " has no pending message");
    }
    const Message& msg = t.inbox.front();
    if (!t.head_delivered) {
        preempt_owner();
        return_to_user(tid, msg.cycle);
        t.head_delivered = true;
    } else if (owner_ != tid || t.state != ThreadState::Running) {
        give_cpu(tid, kNoCycle);
    }
    TraceEvent ev;
    ev.kind = EventKind::IpcReceive;
    ev.tid = tid;
    ev.message = msg.kind;
    ev.faulter = msg.payload.faulter;
    ev.cycle = msg.cycle;
    trace_.append(ev);
    return msg;
}

void Engine::retire_head(Tid tid) {
    auto& t = thread(tid);
    if (!t.inbox.empty()) t.inbox.pop_front();
    t.head_delivered = false;
}

void Engine::suspend(Tid tid, CycleId cycle) {
    auto& t = thread(tid);
    if (t.state != ThreadState::Running) {
        throw SimError(ErrorCode::InvalidArgument,
                       "suspend of non-running thread " + std::to_string(raw(tid)));
    }
    t.state = ThreadState::Suspended;
    TraceEvent ev;
    ev.kind = EventKind::Suspend;
    ev.tid = tid;
    ev.cycle = cycle;
    trace_.append(ev);
}

void Engine::resume(Tid tid, CycleId cycle) {
    auto& t = thread(tid);
    if (t.state != ThreadState::Suspended) {
        throw SimError(ErrorCode::InvalidArgument,
                       "resume of non-suspended thread " + std::to_string(raw(tid)));
    }
    t.state = ThreadState::Ready;
    TraceEvent ev;
    ev.kind = EventKind::Resume;
    ev.tid = tid;
    ev.cycle = cycle;
    trace_.append(ev);
}

void Engine::block_on_receive(Tid tid) {
    thread(tid).state = ThreadState::BlockedOnReceive;
}

void Engine::terminate(Tid tid) {
    thread(tid).state = ThreadState::Terminated;
}

std::string_view to_string(ThreadState state) noexcept {
    switch (state) {
        case ThreadState::Running: return "running";
        case ThreadState::Ready: return "ready";
        case ThreadState::Suspended: return "suspended";
        case ThreadState::BlockedOnReceive: return "blocked";
        case ThreadState::Terminated: return "terminated";
    }
    return "?";
}

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::Applicant: return "applicant";
        case Role::Pager: return "pager";
        case Role::RegionMapper: return "region-mapper";
        case Role::KernelInternal: return "kernel";
    }
    return "?";
}

}  // namespace mpsim
