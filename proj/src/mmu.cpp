#include "mmu.hpp"

namespace mpsim {

void check_address(Vaddr vaddr) {
    if (vaddr >= kAddressLimit) {
        throw SimError(ErrorCode::BadAddress, "address " + std::to_string(vaddr) +
                                                  " outside the 32-bit address space");
    }
}

AddressSpace& Mmu::create_space(Asid asid, const LayoutConfig& layout) {
    layout.validate();
    auto [it, inserted] = spaces_.try_emplace(asid, asid, layout);
    if (!inserted) {
        throw SimError(ErrorCode::InvalidArgument,
                       "duplicate address space " + std::to_string(raw(asid)));
    }
    return it->second;
}

AddressSpace& Mmu::space(Asid asid) {
    return const_cast<AddressSpace&>(std::as_const(*this).space(asid));
}

const AddressSpace& Mmu::space(Asid asid) const {
    auto it = spaces_.find(asid);
    if (it == spaces_.end()) {
        throw SimError(ErrorCode::InvalidArgument,
                       "unknown address space " + std::to_string(raw(asid)));
    }
    return it->second;
}

std::variant<Frame, FaultEvent> Mmu::translate(Asid asid, const MemoryAccess& access) const {
    check_address(access.vaddr);
    const auto pte = space(asid).pages.entry(access.vaddr);
    if (pte.present) return pte.frame;
    return FaultEvent{access.tid, asid, access.vaddr, access.access};
}

void Mmu::map_page(Asid asid, Vaddr vaddr, Frame frame, Marker marker, CycleId cycle) {
    check_address(vaddr);
    if (marker >= kMarkerLimit) {
        throw SimError(ErrorCode::MarkerOverflow,
                       "marker " + std::to_string(marker) + " does not fit in 31 bits");
    }
    auto& as = space(asid);
    const bool was_present = as.pages.entry(vaddr).present;
    as.pages.set(vaddr, {true, frame, marker});

    if (auto rid = region_id_of(as.layout, vaddr)) {
        if (!was_present) ++as.present_in_region[*rid];
        if (as.regions.lookup(*rid).contract == ContractState::Assigned) {
            as.regions.transition(*rid, ContractState::Accepted);
        }
    }

    TraceEvent ev;
    ev.kind = EventKind::MapPage;
    ev.asid = asid;
    ev.vaddr = page_base(vaddr);
    ev.frame = frame;
    ev.marker = marker;
    ev.cycle = cycle;
    trace_.append(ev);
}

UnmapOutcome Mmu::unmap_page(Asid asid, Vaddr vaddr, bool revoke, CycleId cycle) {
    check_address(vaddr);
    auto& as = space(asid);
    auto pte = as.pages.entry(vaddr);
    if (!pte.present) {
        throw SimError(ErrorCode::NotMapped, "page " + hex32(page_base(vaddr)) +
                                                 " of space " + std::to_string(raw(asid)) +
                                                 " is not mapped");
    }
    // The marker survives unmapping; only the present bit is cleared.
    pte.present = false;
    as.pages.set(vaddr, pte);

    UnmapOutcome outcome = UnmapOutcome::Unmapped;
    if (auto rid = region_id_of(as.layout, vaddr)) {
        const auto remaining = --as.present_in_region[*rid];
        if (revoke) {
            if (remaining == 0 && as.regions.lookup(*rid).contract == ContractState::Accepted) {
                as.regions.transition(*rid, ContractState::Revoked);
                outcome = UnmapOutcome::Revoked;
            } else {
                outcome = UnmapOutcome::RevokeIneffective;
            }
        }
    } else if (revoke) {
        outcome = UnmapOutcome::RevokeIneffective;
    }
    if (outcome == UnmapOutcome::RevokeIneffective) {
        warnings_.push_back("revoke ignored for " + hex32(page_base(vaddr)) + " in space " +
                            std::to_string(raw(asid)));
    }

    TraceEvent ev;
    ev.kind = EventKind::UnmapPage;
    ev.asid = asid;
    ev.vaddr = page_base(vaddr);
    ev.revoke = revoke;
    ev.cycle = cycle;
    trace_.append(ev);
    return outcome;
}

}  // namespace mpsim
