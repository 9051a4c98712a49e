#include "fault_dispatch.hpp"

namespace mpsim {

Classification classify(const AddressSpace& as, Vaddr vaddr, const RefusalSet& refusals) {
    Classification cls;
    cls.rid = region_id_of(as.layout, vaddr);
    if (!cls.rid) {
        cls.kind = FaultClass::KernelRange;
        return cls;
    }
    cls.slot = as.regions.lookup(*cls.rid);
    if (cls.slot.contract == ContractState::Unassigned) {
        cls.kind = FaultClass::NoPager;
        return cls;
    }
    if (cls.slot.contract == ContractState::Revoked ||
        (cls.slot.contract == ContractState::Assigned &&
         refusals.refuses(as.asid, *cls.rid, cls.slot.manager))) {
        cls.kind = FaultClass::NotAccepted;
        return cls;
    }
    // The entry is read anyway for its marker, so the present check is free.
    cls.pte = as.pages.entry(vaddr);
    cls.kind = cls.pte.present ? FaultClass::Present : FaultClass::Absent;
    return cls;
}

void FaultDispatcher::assign_manager(Asid asid, Rid rid, Tid pager) {
    if (!engine_.has_thread(pager)) {
        throw SimError(ErrorCode::InvalidArgument,
                       "pager " + std::to_string(raw(pager)) + " is not registered");
    }
    mmu_.space(asid).regions.assign(rid, pager);
}

const RegionSlot& FaultDispatcher::lookup_manager(Asid asid, Rid rid) const {
    return mmu_.space(asid).regions.lookup(rid);
}

std::optional<Tid> FaultDispatcher::outstanding_pager(Tid faulter) const {
    auto it = outstanding_.find(faulter);
    if (it == outstanding_.end()) return std::nullopt;
    return it->second.replier;
}

std::optional<CycleId> FaultDispatcher::outstanding_cycle(Tid faulter) const {
    auto it = outstanding_.find(faulter);
    if (it == outstanding_.end()) return std::nullopt;
    return it->second.cycle;
}

void FaultDispatcher::emit_verdict(const FaultRecord& rec, const FaultVerdict& v) {
    TraceEvent ev;
    ev.kind = EventKind::Verdict;
    ev.tid = rec.event.tid;
    ev.peer = v.pager;
    ev.asid = rec.event.asid;
    ev.vaddr = rec.event.vaddr;
    ev.access = rec.event.access;
    ev.verdict = v.code;
    ev.cycle = rec.id;
    engine_.append_trace(ev);
}

CycleId FaultDispatcher::trap(const FaultEvent& ev) {
    check_address(ev.vaddr);
    const auto& t = engine_.thread(ev.tid);
    if (engine_.cpu_owner() != ev.tid || t.state != ThreadState::Running ||
        engine_.cpu_mode() != CpuMode::User) {
        throw SimError(ErrorCode::NotRunnable,
                       "thread " + std::to_string(raw(ev.tid)) + " is not running in user mode");
    }
    if (t.asid != ev.asid) {
        throw SimError(ErrorCode::InvalidArgument, "fault address space does not match thread");
    }
    FaultRecord rec;
    rec.id = static_cast<CycleId>(faults_.size());
    rec.event = ev;
    faults_.push_back(rec);
    engine_.enter_kernel(rec.id);
    pending_trap_[ev.tid] = rec.id;
    return rec.id;
}

Tid FaultDispatcher::route(const FaultEvent& ev, const Classification& cls) const {
    switch (mode_) {
        case DispatchMode::RegionTable:
        case DispatchMode::InKernel:
            return cls.slot.manager;
        case DispatchMode::PerThreadPager: {
            auto it = thread_pager_.find(ev.tid);
            return it == thread_pager_.end() ? kNoThread : it->second;
        }
        case DispatchMode::RegionMapper: {
            auto it = region_mapper_.find(ev.asid);
            return it == region_mapper_.end() ? kNoThread : it->second;
        }
    }
    return kNoThread;
}

FaultVerdict FaultDispatcher::dispatch(Tid faulter) {
    auto pending = pending_trap_.find(faulter);
    if (pending == pending_trap_.end()) {
        throw SimError(ErrorCode::NoOutstandingFault,
                       "thread " + std::to_string(raw(faulter)) + " has no trapped fault");
    }
    if (engine_.cpu_owner() != faulter || engine_.cpu_mode() != CpuMode::Kernel) {
        throw SimError(ErrorCode::NotRunnable, "dispatch must run on the faulter's kernel path");
    }
    const CycleId id = pending->second;
    pending_trap_.erase(pending);
    FaultRecord& rec = faults_[static_cast<std::size_t>(id)];

    const auto& as = mmu_.space(rec.event.asid);
    const Classification cls = classify(as, rec.event.vaddr, refusals_);
    rec.marker = cls.pte.marker;

    FaultVerdict verdict;
    switch (cls.kind) {
        case FaultClass::KernelRange: verdict.code = VerdictCode::KernelRange; break;
        case FaultClass::NoPager: verdict.code = VerdictCode::NoPager; break;
        case FaultClass::NotAccepted: verdict.code = VerdictCode::NotAccepted; break;
        case FaultClass::Present:
            if (recheck_present_ || mode_ == DispatchMode::InKernel) {
                verdict.code = VerdictCode::ResumedPresent;
            }
            break;
        case FaultClass::Absent: break;
    }

    if (verdict.code == VerdictCode::Dispatched) {
        verdict.pager = route(rec.event, cls);
        if (verdict.pager == kNoThread) verdict.code = VerdictCode::NoPager;
    }
    rec.verdict = verdict;
    emit_verdict(rec, verdict);

    if (verdict.is_general_protection()) {
        // Generic exception handling is not modelled; the thread stops here.
        engine_.terminate(faulter);
        return verdict;
    }
    if (verdict.code == VerdictCode::ResumedPresent) {
        engine_.return_to_user(faulter, id);
        rec.completed = true;
        return verdict;
    }
    if (mode_ == DispatchMode::InKernel) {
        in_kernel_[faulter] = id;
        return verdict;
    }

    engine_.suspend(faulter, id);
    outstanding_[faulter] = {verdict.pager, id};
    Message msg;
    msg.sender = faulter;
    msg.receiver = verdict.pager;
    msg.kind = MessageKind::PageFault;
    msg.payload = {rec.event.vaddr, rec.event.access, faulter, rec.event.asid, cls.pte.marker};
    msg.cycle = id;
    engine_.send_sync(msg);
    return verdict;
}

FaultVerdict FaultDispatcher::handle_fault(const FaultEvent& ev) {
    trap(ev);
    return dispatch(ev.tid);
}

void FaultDispatcher::reflect(Tid from, Tid to, Tid faulter) {
    auto it = outstanding_.find(faulter);
    if (it == outstanding_.end()) {
        throw SimError(ErrorCode::NoOutstandingFault,
                       "no outstanding fault for thread " + std::to_string(raw(faulter)));
    }
    if (it->second.replier != from) {
        throw SimError(ErrorCode::WrongPager,
                       "thread " + std::to_string(raw(from)) + " does not hold the fault");
    }
    const FaultRecord& rec = faults_[static_cast<std::size_t>(it->second.cycle)];
    it->second.replier = to;
    Message msg;
    msg.sender = from;
    msg.receiver = to;
    msg.kind = MessageKind::Reflection;
    msg.payload = {rec.event.vaddr, rec.event.access, faulter, rec.event.asid, rec.marker};
    msg.cycle = rec.id;
    engine_.send_sync(msg);
}

void FaultDispatcher::pager_reply(Tid pager, Tid faulter, std::optional<MapRequest> map) {
    auto it = outstanding_.find(faulter);
    if (it == outstanding_.end()) {
        throw SimError(ErrorCode::NoOutstandingFault,
                       "no outstanding fault for thread " + std::to_string(raw(faulter)));
    }
    if (it->second.replier != pager) {
        throw SimError(ErrorCode::WrongPager,
                       "thread " + std::to_string(raw(pager)) + " was not sent this fault");
    }
    const CycleId id = it->second.cycle;
    FaultRecord& rec = faults_[static_cast<std::size_t>(id)];

    if (map && mode_ == DispatchMode::RegionTable) {
        const auto& as = mmu_.space(rec.event.asid);
        auto rid = region_id_of(as.layout, rec.event.vaddr);
        if (!rid || as.regions.lookup(*rid).manager != pager) {
            throw SimError(ErrorCode::WrongPager, "pager does not manage the faulted region");
        }
    }

    if (engine_.cpu_owner() != pager || engine_.cpu_mode() != CpuMode::User) {
        engine_.switch_to(pager);
    }
    engine_.enter_kernel(id);
    if (map) mmu_.map_page(rec.event.asid, rec.event.vaddr, map->frame, map->marker, id);
    outstanding_.erase(it);

    Message msg;
    msg.sender = pager;
    msg.receiver = faulter;
    msg.kind = MessageKind::Reply;
    msg.payload = {rec.event.vaddr, rec.event.access, faulter, rec.event.asid, rec.marker};
    msg.cycle = id;
    engine_.send_sync(msg);
    rec.completed = true;
}

void FaultDispatcher::complete_in_kernel(Tid faulter, std::optional<MapRequest> map) {
    auto it = in_kernel_.find(faulter);
    if (it == in_kernel_.end()) {
        throw SimError(ErrorCode::NoOutstandingFault,
                       "no in-kernel fault for thread " + std::to_string(raw(faulter)));
    }
    const CycleId id = it->second;
    in_kernel_.erase(it);
    FaultRecord& rec = faults_[static_cast<std::size_t>(id)];
    if (map) {
        mmu_.map_page(rec.event.asid, rec.event.vaddr, map->frame, map->marker, id);
        engine_.return_to_user(faulter, id);
        rec.completed = true;
    } else {
        // Resolver declined: the thread stays stopped in the kernel.
        engine_.suspend(faulter, id);
    }
}

}  // namespace mpsim
