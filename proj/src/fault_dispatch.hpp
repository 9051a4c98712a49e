#pragma once

#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "address_space.hpp"
#include "mmu.hpp"
#include "sim_core.hpp"

namespace mpsim {

enum class FaultClass : std::uint8_t { KernelRange, NoPager, NotAccepted, Present, Absent };

struct Classification {
    FaultClass kind = FaultClass::KernelRange;
    std::optional<Rid> rid;
    RegionSlot slot;
    PageTableEntry pte;
};

// Pagers that declared they will not accept a region they were assigned.
class RefusalSet {
public:
    void add(Asid asid, Rid rid, Tid pager) { refusals_.emplace(asid, rid, pager); }
    bool refuses(Asid asid, Rid rid, Tid pager) const {
        return refusals_.contains({asid, rid, pager});
    }

private:
    std::set<std::tuple<Asid, Rid, Tid>> refusals_;
};

// Zero-level classification. Pure: depends only on the address, the region
// table, the page table and the refusal declarations. Checks run in order:
// kernel range, assignment, contract, present bit.
Classification classify(const AddressSpace& as, Vaddr vaddr, const RefusalSet& refusals);

struct FaultVerdict {
    VerdictCode code = VerdictCode::Dispatched;
    Tid pager = kNoThread;  // set for Dispatched

    bool is_general_protection() const noexcept {
        return code == VerdictCode::KernelRange || code == VerdictCode::NoPager ||
               code == VerdictCode::NotAccepted;
    }
    bool operator==(const FaultVerdict&) const = default;
};

// How the kernel finds the thread that resolves a pure fault.
enum class DispatchMode : std::uint8_t {
    RegionTable,     // region manager from the per-space table
    PerThreadPager,  // one pager per faulting thread
    RegionMapper,    // per-space region-mapper thread
    InKernel,        // kernel resolves the fault itself
};

struct MapRequest {
    Frame frame = 0;
    Marker marker = 0;
};

struct FaultRecord {
    CycleId id = kNoCycle;
    FaultEvent event;
    std::optional<FaultVerdict> verdict;
    Marker marker = 0;
    bool completed = false;
};

class FaultDispatcher {
public:
    FaultDispatcher(Engine& engine, Mmu& mmu, DispatchMode mode = DispatchMode::RegionTable)
        : engine_(engine), mmu_(mmu), mode_(mode) {}

    DispatchMode mode() const noexcept { return mode_; }
    void set_present_recheck(bool on) noexcept { recheck_present_ = on; }

    void assign_manager(Asid asid, Rid rid, Tid pager);
    const RegionSlot& lookup_manager(Asid asid, Rid rid) const;
    void refuse(Asid asid, Rid rid, Tid pager) { refusals_.add(asid, rid, pager); }
    const RefusalSet& refusals() const noexcept { return refusals_; }

    void set_thread_pager(Tid thread, Tid pager) { thread_pager_[thread] = pager; }
    void set_region_mapper(Asid asid, Tid mapper) { region_mapper_[asid] = mapper; }

    // Trap entry (one MODE_U2K) for the running faulter; opens a fault cycle.
    CycleId trap(const FaultEvent& ev);
    // The zero-level path for a trapped thread.
    FaultVerdict dispatch(Tid faulter);
    FaultVerdict handle_fault(const FaultEvent& ev);

    // Region mapper forwards an outstanding fault to the real pager.
    void reflect(Tid from, Tid to, Tid faulter);
    // Pager's reply syscall; optionally carries the mapping for the faulted page.
    void pager_reply(Tid pager, Tid faulter, std::optional<MapRequest> map = {});
    // In-kernel resolution (monolithic) of a dispatched fault.
    void complete_in_kernel(Tid faulter, std::optional<MapRequest> map);

    bool has_pending_trap(Tid tid) const { return pending_trap_.contains(tid); }
    std::optional<Tid> outstanding_pager(Tid faulter) const;
    std::optional<CycleId> outstanding_cycle(Tid faulter) const;
    const std::vector<FaultRecord>& faults() const noexcept { return faults_; }

private:
    struct Outstanding {
        Tid replier;
        CycleId cycle;
    };

    void emit_verdict(const FaultRecord& rec, const FaultVerdict& v);
    Tid route(const FaultEvent& ev, const Classification& cls) const;

    Engine& engine_;
    Mmu& mmu_;
    DispatchMode mode_;
    bool recheck_present_ = true;
    RefusalSet refusals_;
    std::map<Tid, Tid> thread_pager_;
    std::map<Asid, Tid> region_mapper_;
    std::map<Tid, CycleId> pending_trap_;
    std::map<Tid, Outstanding> outstanding_;
    std::map<Tid, CycleId> in_kernel_;
    std::vector<FaultRecord> faults_;
};

}  // namespace mpsim
