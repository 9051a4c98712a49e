#include "doctest.h"
#include "fault_dispatch.hpp"

using namespace mpsim;

namespace {

struct Rig {
    Engine engine;
    Mmu mmu{engine.trace()};
    FaultDispatcher kernel{engine, mmu};

    explicit Rig(const LayoutConfig& cfg = LayoutConfig::small()) {
        mmu.create_space(Asid{1}, cfg);
        engine.add_thread(Tid{1}, Asid{1}, Role::Applicant);
        engine.add_thread(Tid{2}, Asid{1}, Role::Pager, ThreadState::BlockedOnReceive);
        engine.add_thread(Tid{3}, Asid{1}, Role::Pager, ThreadState::BlockedOnReceive);
        auto s = Scheduler::deterministic({Tid{1}});
        engine.schedule_next(s);
    }

    AddressSpace& as() { return mmu.space(Asid{1}); }
    FaultEvent fault(Vaddr v) { return {Tid{1}, Asid{1}, v, AccessType::Read}; }
};

VerdictCode verdict_at(Rig& rig, Vaddr v, const RefusalSet& refusals = {}) {
    const auto k = classify(rig.as(), v, refusals).kind;
    switch (k) {
        case FaultClass::KernelRange: return VerdictCode::KernelRange;
        case FaultClass::NoPager: return VerdictCode::NoPager;
        case FaultClass::NotAccepted: return VerdictCode::NotAccepted;
        case FaultClass::Present: return VerdictCode::ResumedPresent;
        case FaultClass::Absent: return VerdictCode::Dispatched;
    }
    return VerdictCode::Dispatched;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("classification order") {
    Rig rig;
    RefusalSet refuse;
    CHECK(verdict_at(rig, 0x20000) == VerdictCode::KernelRange);
    CHECK(verdict_at(rig, 0x0000) == VerdictCode::NoPager);

    rig.kernel.assign_manager(Asid{1}, 0, Tid{2});
    CHECK(verdict_at(rig, 0x0000) == VerdictCode::Dispatched);
    refuse.add(Asid{1}, 0, Tid{2});
    CHECK(verdict_at(rig, 0x0000, refuse) == VerdictCode::NotAccepted);

    rig.mmu.map_page(Asid{1}, 0x0000, 5, 0);
    // Acceptance is expressed by mapping; a refusal no longer applies.
    CHECK(verdict_at(rig, 0x0000, refuse) == VerdictCode::ResumedPresent);
    CHECK(verdict_at(rig, 0x1000, refuse) == VerdictCode::Dispatched);

    rig.mmu.unmap_page(Asid{1}, 0x0000, true);
    CHECK(verdict_at(rig, 0x0000) == VerdictCode::NotAccepted);
    CHECK(verdict_at(rig, 0x3000) == VerdictCode::NotAccepted);

    rig.kernel.assign_manager(Asid{1}, 0, Tid{3});
    CHECK(verdict_at(rig, 0x0000) == VerdictCode::Dispatched);
}

TEST_CASE("classification carries the page marker") {
    Rig rig;
    rig.kernel.assign_manager(Asid{1}, 1, Tid{2});
    rig.mmu.map_page(Asid{1}, 0x4000, 5, 77);
    rig.mmu.unmap_page(Asid{1}, 0x4000, false);
    const auto cls = classify(rig.as(), 0x4000, {});
    CHECK(cls.kind == FaultClass::Absent);
    CHECK(cls.pte.marker == 77);
    CHECK(cls.rid == Rid{1});
}

TEST_CASE("a dispatched fault goes to the region manager with its marker") {
    Rig rig;
    rig.kernel.assign_manager(Asid{1}, 1, Tid{3});
    rig.mmu.map_page(Asid{1}, 0x4000, 5, 77);
    rig.mmu.unmap_page(Asid{1}, 0x4000, false);
    const auto v = rig.kernel.handle_fault(rig.fault(0x4010));
    CHECK(v == FaultVerdict{VerdictCode::Dispatched, Tid{3}});
    CHECK(rig.kernel.outstanding_pager(Tid{1}) == Tid{3});
    CHECK(rig.engine.thread(Tid{1}).state == ThreadState::Suspended);
    const auto& head = rig.engine.thread(Tid{3}).inbox.front();
    CHECK(head.payload.marker == 77);
    CHECK(head.payload.vaddr == 0x4010);
}

TEST_CASE("general protection stops the thread") {
    Rig rig;
    const auto v = rig.kernel.handle_fault(rig.fault(0x8000));
    CHECK(v.code == VerdictCode::NoPager);
    CHECK(v.is_general_protection());
    CHECK(rig.engine.thread(Tid{1}).state == ThreadState::Terminated);
    CHECK_FALSE(rig.kernel.outstanding_pager(Tid{1}).has_value());
}

TEST_CASE("present pages resume without a pager") {
    Rig rig;
    rig.kernel.assign_manager(Asid{1}, 0, Tid{2});
    rig.mmu.map_page(Asid{1}, 0x1000, 5, 0);
    const auto before = rig.engine.trace().size();
    const auto v = rig.kernel.handle_fault(rig.fault(0x1000));
    CHECK(v.code == VerdictCode::ResumedPresent);
    const auto& t = rig.engine.trace();
    REQUIRE(t.size() == before + 3);
    CHECK(t[before].kind == EventKind::ModeSwitchUserToKernel);
    CHECK(t[before + 1].kind == EventKind::Verdict);
    CHECK(t[before + 2].kind == EventKind::ModeSwitchKernelToUser);
}

TEST_CASE("pager reply checks") {
    Rig rig;
    rig.kernel.assign_manager(Asid{1}, 0, Tid{2});
    CHECK(code_of([&] { rig.kernel.pager_reply(Tid{2}, Tid{1}); }) == ErrorCode::NoOutstandingFault);
    rig.kernel.handle_fault(rig.fault(0x2000));
    CHECK(code_of([&] { rig.kernel.pager_reply(Tid{3}, Tid{1}); }) == ErrorCode::WrongPager);

    rig.engine.deliver_head(Tid{2});
    rig.engine.retire_head(Tid{2});
    rig.kernel.pager_reply(Tid{2}, Tid{1}, MapRequest{8, 3});
    CHECK(rig.engine.thread(Tid{1}).state == ThreadState::Running);
    CHECK(rig.as().pages.entry(0x2000) == PageTableEntry{true, 8, 3});
    CHECK(rig.kernel.faults().at(0).completed);
    CHECK(code_of([&] { rig.kernel.pager_reply(Tid{2}, Tid{1}); }) == ErrorCode::NoOutstandingFault);
}

TEST_CASE("a pager may not map into a region it does not manage") {
    Rig rig;
    rig.kernel.assign_manager(Asid{1}, 0, Tid{2});
    rig.kernel.handle_fault(rig.fault(0x2000));
    rig.kernel.assign_manager(Asid{1}, 0, Tid{3});
    CHECK(code_of([&] { rig.kernel.pager_reply(Tid{2}, Tid{1}, MapRequest{1, 0}); }) ==
          ErrorCode::WrongPager);
}

TEST_CASE("trap needs a thread running in user mode") {
    Rig rig;
    FaultEvent other{Tid{2}, Asid{1}, 0x1000, AccessType::Read};
    CHECK(code_of([&] { rig.kernel.trap(other); }) == ErrorCode::NotRunnable);
    CHECK(code_of([&] { rig.kernel.dispatch(Tid{1}); }) == ErrorCode::NoOutstandingFault);
}

TEST_CASE("assigning an unregistered pager") {
    Rig rig;
    CHECK(code_of([&] { rig.kernel.assign_manager(Asid{1}, 0, Tid{9}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("region mapper routing and reflection") {
    Rig rig;
    rig.engine.add_thread(Tid{4}, Asid{1}, Role::RegionMapper, ThreadState::BlockedOnReceive);
    FaultDispatcher l4re(rig.engine, rig.mmu, DispatchMode::RegionMapper);
    l4re.set_region_mapper(Asid{1}, Tid{4});
    rig.kernel.assign_manager(Asid{1}, 0, Tid{2});
    const auto v = l4re.handle_fault(rig.fault(0x1000));
    CHECK(v.pager == Tid{4});
    rig.engine.deliver_head(Tid{4});
    rig.engine.retire_head(Tid{4});
    CHECK(code_of([&] { l4re.reflect(Tid{3}, Tid{2}, Tid{1}); }) == ErrorCode::WrongPager);
    l4re.reflect(Tid{4}, Tid{2}, Tid{1});
    CHECK(l4re.outstanding_pager(Tid{1}) == Tid{2});
}
