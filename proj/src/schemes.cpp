#include "schemes.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <set>
#include <sstream>

namespace mpsim {

namespace {

DispatchMode dispatch_mode(SchemeKind scheme) {
    switch (scheme) {
        case SchemeKind::Monolithic: return DispatchMode::InKernel;
        case SchemeKind::L4SinglePager: return DispatchMode::PerThreadPager;
        case SchemeKind::ProposedRegionDispatch: return DispatchMode::RegionTable;
        case SchemeKind::L4PlusL4Re: return DispatchMode::RegionMapper;
    }
    return DispatchMode::RegionTable;
}

[[noreturn]] void mismatch(SchemeKind scheme, const std::string& why) {
    throw SimError(ErrorCode::SchemeMismatch, std::string(to_string(scheme)) + ": " + why);
}

constexpr int kMaxRetries = 4;

// One simulated system running one scenario under one scheme.
class System {
public:
    System(const ScenarioFile& scenario, SchemeKind scheme)
        : sc_(scenario),
          scheme_(scheme),
          layout_(scenario.effective_layout()),
          mmu_(engine_.trace()),
          kernel_(engine_, mmu_, dispatch_mode(scheme)) {
        setup();
    }

    void run(std::optional<std::uint64_t> seed);
    RunResult finish() &&;

private:
    enum class Depth : std::uint8_t { Full, HoldAtServer, TrapOnly };

    bool microkernel() const noexcept { return scheme_ != SchemeKind::Monolithic; }

    void setup();
    void exec(const Step& step);
    void assign(Asid asid, Rid rid, Tid pager);
    void make_current(Tid tid);
    void access(Tid tid, Vaddr vaddr, AccessType type, Depth depth);
    void after_verdict(Tid faulter, const FaultVerdict& v);
    void resolve_in_kernel(Tid faulter, const FaultVerdict& v);
    void retry(Tid tid);
    void dispatch(Tid tid);
    void serve();
    std::optional<Tid> next_server() const;
    void process(Tid server);
    void run_deferred();
    void pager_unmaps(Tid pager, const std::vector<action::Unmap>& unmaps);

    const ScenarioFile& sc_;
    SchemeKind scheme_;
    LayoutConfig layout_;
    Engine engine_;
    Mmu mmu_;
    FaultDispatcher kernel_;
    FrameAllocator frames_;
    std::map<Tid, PagerServer> servers_;
    std::map<Asid, MappingDatabase> databases_;
    std::set<Asid> explicit_db_;
    std::map<Tid, MemoryAccess> pending_access_;
    std::map<Tid, int> retries_;
    std::deque<std::pair<Tid, action::Unmap>> deferred_;
};

void System::setup() {
    if (scheme_ != SchemeKind::L4PlusL4Re) {
        if (!sc_.db_ranges.empty()) mismatch(scheme_, "mapping-database ranges need a region mapper");
        for (const auto& t : sc_.threads) {
            if (t.role == Role::RegionMapper) mismatch(scheme_, "scheme has no region mapper");
        }
    }

    std::set<Frame> reserved;
    for (const auto& p : sc_.pagers) {
        for (const auto& [page, frame] : p.behavior.backing) reserved.insert(frame);
    }
    frames_ = FrameAllocator(sc_.frame_limit.value_or(Frame{1} << 20), std::move(reserved));

    std::set<Asid> asids;
    Tid max_tid = kNoThread;
    for (const auto& t : sc_.threads) {
        const auto initial = t.role == Role::Applicant ? ThreadState::Ready
                                                       : ThreadState::BlockedOnReceive;
        engine_.add_thread(t.tid, t.asid, t.role, initial);
        asids.insert(t.asid);
        max_tid = std::max(max_tid, t.tid);
        if (t.role == Role::Pager || t.role == Role::RegionMapper) {
            PagerBehavior behavior;
            if (const auto* decl = sc_.find_pager(t.tid)) behavior = decl->behavior;
            else if (t.role == Role::RegionMapper) behavior.policy = PagerPolicy::Reflecting;
            servers_.emplace(t.tid, PagerServer(t.tid, behavior, layout_));
        }
    }
    for (Asid a : asids) mmu_.create_space(a, layout_);
    for (const auto& r : sc_.refusals) kernel_.refuse(r.asid, r.rid, r.pager);

    switch (scheme_) {
        case SchemeKind::L4SinglePager: {
            // One pager per thread: explicit, or the only manager its space uses.
            std::map<Asid, std::set<Tid>> managers;
            for (const auto& s : sc_.script) {
                if (s.kind == StepKind::Assign) managers[s.asid].insert(s.tid);
            }
            for (const auto& t : sc_.threads) {
                if (t.role != Role::Applicant) continue;
                if (t.pager) {
                    kernel_.set_thread_pager(t.tid, *t.pager);
                    continue;
                }
                const auto& m = managers[t.asid];
                if (m.size() > 1) {
                    mismatch(scheme_, "thread " + std::to_string(raw(t.tid)) +
                                          " has several pagers and no pager= choice");
                }
                if (m.size() == 1) kernel_.set_thread_pager(t.tid, *m.begin());
            }
            break;
        }
        case SchemeKind::L4PlusL4Re: {
            for (const auto& t : sc_.threads) {
                if (t.role == Role::RegionMapper) kernel_.set_region_mapper(t.asid, t.tid);
            }
            // Spaces without a declared region mapper get one, with fresh ids.
            Tid next{raw(max_tid) + 1};
            for (Asid a : asids) {
                bool has_mapper = false;
                for (const auto& t : sc_.threads) {
                    has_mapper |= t.role == Role::RegionMapper && t.asid == a;
                }
                if (has_mapper) continue;
                engine_.add_thread(next, a, Role::RegionMapper, ThreadState::BlockedOnReceive);
                PagerBehavior reflect;
                reflect.policy = PagerPolicy::Reflecting;
                servers_.emplace(next, PagerServer(next, reflect, layout_));
                kernel_.set_region_mapper(a, next);
                next = Tid{raw(next) + 1};
            }
            for (const auto& d : sc_.db_ranges) {
                databases_[d.asid].insert(d.start, d.end, d.target);
                explicit_db_.insert(d.asid);
            }
            kernel_.set_present_recheck(false);
            break;
        }
        case SchemeKind::Monolithic:
        case SchemeKind::ProposedRegionDispatch:
            break;
    }
}

void System::assign(Asid asid, Rid rid, Tid pager) {
    kernel_.assign_manager(asid, rid, pager);
    if (scheme_ == SchemeKind::L4PlusL4Re && !explicit_db_.contains(asid)) {
        auto& db = databases_[asid];
        const Vaddr start = region_start(layout_, rid);
        db.erase_overlapping(start, start + layout_.region_size);
        db.insert(start, start + layout_.region_size, pager);
    }
}

void System::make_current(Tid tid) {
    const auto& t = engine_.thread(tid);
    if (t.state == ThreadState::Terminated) {
        throw SimError(ErrorCode::NotRunnable,
                       "thread " + std::to_string(raw(tid)) + " was terminated");
    }
    if (engine_.cpu_owner() == tid && t.state == ThreadState::Running) return;
    auto scheduler = Scheduler::deterministic({tid});
    engine_.schedule_next(scheduler);
}

void System::access(Tid tid, Vaddr vaddr, AccessType type, Depth depth) {
    if (engine_.thread(tid).role == Role::RegionMapper) {
        mismatch(scheme_, "the region mapper lives in unswappable memory and must not fault");
    }
    if (kernel_.has_pending_trap(tid)) {
        throw SimError(ErrorCode::NotRunnable,
                       "thread " + std::to_string(raw(tid)) + " is still in the kernel");
    }
    make_current(tid);
    const MemoryAccess acc{tid, vaddr, type};
    const auto result = mmu_.translate(engine_.thread(tid).asid, acc);
    if (std::holds_alternative<Frame>(result)) return;

    pending_access_[tid] = acc;
    retries_[tid] = 0;
    kernel_.trap(std::get<FaultEvent>(result));
    if (depth == Depth::TrapOnly) return;
    after_verdict(tid, kernel_.dispatch(tid));
    if (depth == Depth::Full) serve();
}

void System::after_verdict(Tid faulter, const FaultVerdict& v) {
    if (v.is_general_protection()) {
        pending_access_.erase(faulter);
        return;
    }
    if (v.code == VerdictCode::ResumedPresent) {
        retry(faulter);
        return;
    }
    if (scheme_ == SchemeKind::Monolithic) resolve_in_kernel(faulter, v);
}

void System::resolve_in_kernel(Tid faulter, const FaultVerdict& v) {
    // The kernel runs the paging module of the region's manager in place.
    auto it = servers_.find(v.pager);
    if (it == servers_.end()) {
        throw SimError(ErrorCode::SchemeMismatch, "region manager has no paging policy");
    }
    const auto& rec = kernel_.faults().back();
    const FaultPayload payload{rec.event.vaddr, rec.event.access, faulter, rec.event.asid,
                               rec.marker};
    std::optional<MapRequest> map;
    for (const auto& act : it->second.on_page_fault(payload, frames_)) {
        if (const auto* m = std::get_if<action::MapAndReply>(&act)) {
            map = MapRequest{m->frame, m->marker};
        } else if (const auto* u = std::get_if<action::Unmap>(&act)) {
            deferred_.emplace_back(v.pager, *u);
        }
    }
    kernel_.complete_in_kernel(faulter, map);
    if (map) {
        retry(faulter);
        run_deferred();
    }
}

void System::retry(Tid tid) {
    auto it = pending_access_.find(tid);
    if (it == pending_access_.end()) return;
    const MemoryAccess acc = it->second;
    const auto result = mmu_.translate(engine_.thread(tid).asid, acc);
    if (std::holds_alternative<Frame>(result)) {
        pending_access_.erase(it);
        return;
    }
    if (++retries_[tid] > kMaxRetries) {
        throw SimError(ErrorCode::Livelock, "thread " + std::to_string(raw(tid)) +
                                                " keeps faulting on " + hex32(acc.vaddr));
    }
    kernel_.trap(std::get<FaultEvent>(result));
    after_verdict(tid, kernel_.dispatch(tid));
}

void System::dispatch(Tid tid) {
    // Nothing to continue when the access did not fault under this scheme.
    if (!kernel_.has_pending_trap(tid)) return;
    if (engine_.cpu_owner() != tid) engine_.switch_to(tid);
    after_verdict(tid, kernel_.dispatch(tid));
}

std::optional<Tid> System::next_server() const {
    // Prefer a server already holding a delivered message, then the oldest
    // queued fault.
    std::optional<Tid> best;
    CycleId best_cycle = 0;
    bool best_delivered = false;
    for (const auto& [tid, tcb] : engine_.threads()) {
        if (tcb.inbox.empty()) continue;
        const CycleId c = tcb.inbox.front().cycle;
        const bool delivered = tcb.head_delivered;
        if (!best || (delivered && !best_delivered) ||
            (delivered == best_delivered && c < best_cycle)) {
            best = tid;
            best_cycle = c;
            best_delivered = delivered;
        }
    }
    return best;
}

void System::serve() {
    for (;;) {
        if (auto server = next_server()) {
            process(*server);
        } else if (!deferred_.empty()) {
            run_deferred();
        } else {
            return;
        }
    }
}

void System::process(Tid server_tid) {
    const Message msg = engine_.deliver_head(server_tid);
    engine_.retire_head(server_tid);
    auto& server = servers_.at(server_tid);

    const MappingDatabase* db = nullptr;
    if (server.behavior().policy == PagerPolicy::Reflecting) {
        auto it = databases_.find(engine_.thread(server_tid).asid);
        static const MappingDatabase empty;
        db = it == databases_.end() ? &empty : &it->second;
    }

    for (const auto& act : server.on_page_fault(msg.payload, frames_, db)) {
        if (const auto* m = std::get_if<action::MapAndReply>(&act)) {
            kernel_.pager_reply(server_tid, m->faulter, MapRequest{m->frame, m->marker});
            retry(m->faulter);
        } else if (const auto* r = std::get_if<action::Reply>(&act)) {
            kernel_.pager_reply(server_tid, r->faulter);
            retry(r->faulter);
        } else if (const auto* f = std::get_if<action::Forward>(&act)) {
            kernel_.reflect(server_tid, f->target, f->faulter);
        } else if (const auto* u = std::get_if<action::Unmap>(&act)) {
            deferred_.emplace_back(server_tid, *u);
        } else {
            // Ignored: back to waiting, the faulter stays suspended.
            engine_.enter_kernel(kNoCycle);
            engine_.block_on_receive(server_tid);
        }
    }
}

void System::run_deferred() {
    while (!deferred_.empty()) {
        const Tid pager = deferred_.front().first;
        std::vector<action::Unmap> batch;
        while (!deferred_.empty() && deferred_.front().first == pager) {
            batch.push_back(deferred_.front().second);
            deferred_.pop_front();
        }
        pager_unmaps(pager, batch);
    }
}

void System::pager_unmaps(Tid pager, const std::vector<action::Unmap>& unmaps) {
    if (microkernel()) {
        // Wake the pager, let it issue one unmap system call, then wait again.
        engine_.switch_to(pager);
        if (engine_.cpu_mode() == CpuMode::Kernel) engine_.return_to_user(pager, kNoCycle);
        engine_.enter_kernel(kNoCycle);
    }
    for (const auto& u : unmaps) {
        mmu_.unmap_page(u.asid, u.vaddr, u.revoke);
    }
    if (microkernel()) engine_.block_on_receive(pager);
}

void System::exec(const Step& step) {
    switch (step.kind) {
        case StepKind::Assign: assign(step.asid, step.rid, step.tid); break;
        case StepKind::Access: access(step.tid, step.vaddr, step.access, Depth::Full); break;
        case StepKind::Fault:
            access(step.tid, step.vaddr, step.access,
                   microkernel() ? Depth::HoldAtServer : Depth::Full);
            break;
        case StepKind::Trap: access(step.tid, step.vaddr, step.access, Depth::TrapOnly); break;
        case StepKind::Dispatch: dispatch(step.tid); break;
        case StepKind::Serve: serve(); break;
        case StepKind::Unmap: {
            auto& server = servers_.at(step.tid);
            server.note_unmapped(step.asid, step.vaddr);
            pager_unmaps(step.tid, {action::Unmap{step.asid, step.vaddr, step.revoke}});
            break;
        }
    }
}

void System::run(std::optional<std::uint64_t> seed) {
    if (!seed) {
        for (const auto& step : sc_.script) exec(step);
        serve();
        return;
    }

    std::map<Tid, std::deque<const Step*>> queues;
    for (const auto& step : sc_.script) {
        if (step.kind == StepKind::Assign) {
            exec(step);
        } else if (step.kind == StepKind::Access) {
            queues[step.tid].push_back(&step);
        } else {
            throw SimError(ErrorCode::InvalidArgument,
                           "seeded scheduling needs a script of accesses and assignments");
        }
    }
    auto scheduler = Scheduler::seeded_round_robin(*seed);
    auto has_work = [&queues](Tid t) {
        auto it = queues.find(t);
        return it != queues.end() && !it->second.empty();
    };
    while (std::any_of(queues.begin(), queues.end(),
                       [](const auto& q) { return !q.second.empty(); })) {
        const Tid tid = engine_.schedule_next(scheduler, has_work);
        const Step* step = queues[tid].front();
        queues[tid].pop_front();
        exec(*step);
    }
    serve();
}

RunResult System::finish() && {
    RunResult out;
    out.scheme = scheme_;
    out.trace = std::move(engine_.trace());
    out.faults = kernel_.faults();
    for (const auto& [asid, as] : mmu_.spaces()) out.final_pages[asid] = as.pages.present_entries();
    out.warnings = mmu_.warnings();
    return out;
}

}  // namespace

std::string RunResult::page_table_text() const {
    std::ostringstream out;
    for (const auto& [asid, pages] : final_pages) {
        for (const auto& [vaddr, pte] : pages) {
            out << "asid=" << raw(asid) << " vaddr=" << hex32(vaddr) << " frame=" << pte.frame
                << " marker=" << pte.marker << '\n';
        }
    }
    return out.str();
}

RunResult run_scenario(SchemeKind scheme, const ScenarioFile& scenario,
                       std::optional<std::uint64_t> seed) {
    System system(scenario, scheme);
    system.run(seed);
    return std::move(system).finish();
}

CycleMetrics cycle_metrics(const Trace& trace, std::size_t fault_index) {
    const auto events = trace.events();
    const auto id = static_cast<CycleId>(fault_index);
    auto start = std::find_if(events.begin(), events.end(), [id](const TraceEvent& e) {
        return e.cycle == id && e.kind == EventKind::ModeSwitchUserToKernel;
    });
    if (start == events.end()) {
        throw SimError(ErrorCode::InvalidArgument,
                       "trace has no fault " + std::to_string(fault_index));
    }
    const Tid faulter = start->tid;

    CycleMetrics m;
    for (auto it = start; it != events.end(); ++it) {
        if (it->cycle != id) continue;
        switch (it->kind) {
            case EventKind::ModeSwitchUserToKernel:
            case EventKind::ModeSwitchKernelToUser: ++m.mode_switches; break;
            case EventKind::ContextSwitch: ++m.context_switches; break;
            case EventKind::IpcSend: ++m.ipc_messages; break;
            case EventKind::IpcReceive: ++m.pager_invocations; break;
            default: break;
        }
        if (it->kind == EventKind::ModeSwitchKernelToUser && it->tid == faulter) {
            // The faulter runs again once the (optional) switch to it is done.
            auto next = std::next(it);
            if (next != events.end() && next->cycle == id &&
                next->kind == EventKind::ContextSwitch && next->peer == faulter) {
                ++m.context_switches;
            }
            return m;
        }
    }
    throw SimError(ErrorCode::IncompleteCycle,
                   "fault " + std::to_string(fault_index) + ": thread " +
                       std::to_string(raw(faulter)) + " never resumed");
}

std::size_t fault_count(const Trace& trace) {
    CycleId max = kNoCycle;
    for (const auto& e : trace.events()) max = std::max(max, e.cycle);
    return static_cast<std::size_t>(max + 1);
}

RunTotals run_totals(const Trace& trace) {
    RunTotals t;
    t.faults = fault_count(trace);
    for (std::size_t i = 0; i < t.faults; ++i) {
        try {
            t.totals += cycle_metrics(trace, i);
            ++t.completed;
        } catch (const SimError& e) {
            if (e.code() != ErrorCode::IncompleteCycle) throw;
        }
    }
    return t;
}

Ratio reduction(std::int64_t value, std::int64_t baseline) noexcept {
    if (baseline == 0) return {};
    return {baseline - value, baseline};
}

const RunTotals& OverheadReport::totals(SchemeKind scheme) const {
    for (const auto& [k, t] : rows) {
        if (k == scheme) return t;
    }
    throw SimError(ErrorCode::InvalidArgument, "scheme missing from report");
}

namespace {
std::string ratio_text(const Ratio& r) {
    if (!r.defined()) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%lld/%lld (%.1f%%)", static_cast<long long>(r.num),
                  static_cast<long long>(r.den), r.percent());
    return buf;
}
}  // namespace

std::string OverheadReport::to_table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %7s %10s %14s %17s %13s %18s\n", "scheme", "faults",
                  "completed", "mode_switches", "context_switches", "ipc_messages",
                  "pager_invocations");
    out << line;
    for (const auto& [scheme, t] : rows) {
        std::snprintf(line, sizeof line, "%-12s %7zu %10zu %14u %17u %13u %18u\n",
                      std::string(to_string(scheme)).c_str(), t.faults, t.completed,
                      t.totals.mode_switches, t.totals.context_switches, t.totals.ipc_messages,
                      t.totals.pager_invocations);
        out << line;
    }
    if (!reductions.empty()) {
        out << '\n';
        std::snprintf(line, sizeof line, "%-26s %-20s %-20s\n", "reduction", "mode_switches",
                      "context_switches");
        out << line;
        for (const auto& r : reductions) {
            const std::string pair =
                std::string(to_string(r.scheme)) + " vs " + std::string(to_string(r.baseline));
            std::snprintf(line, sizeof line, "%-26s %-20s %-20s\n", pair.c_str(),
                          ratio_text(r.mode_switches).c_str(),
                          ratio_text(r.context_switches).c_str());
            out << line;
        }
    }
    return out.str();
}

std::string OverheadReport::to_kv() const {
    std::ostringstream out;
    for (const auto& [scheme, t] : rows) {
        const std::string p = "scheme." + std::string(to_string(scheme)) + ".";
        out << p << "faults=" << t.faults << '\n'
            << p << "completed=" << t.completed << '\n'
            << p << "mode_switches=" << t.totals.mode_switches << '\n'
            << p << "context_switches=" << t.totals.context_switches << '\n'
            << p << "ipc_messages=" << t.totals.ipc_messages << '\n'
            << p << "pager_invocations=" << t.totals.pager_invocations << '\n';
    }
    for (const auto& r : reductions) {
        const std::string p = "reduction." + std::string(to_string(r.scheme)) + "." +
                              std::string(to_string(r.baseline)) + ".";
        auto emit = [&](std::string_view metric, const Ratio& ratio) {
            if (!ratio.defined()) {
                out << p << metric << "=n/a\n";
                return;
            }
            char pct[32];
            std::snprintf(pct, sizeof pct, "%.1f", ratio.percent());
            out << p << metric << '=' << ratio.num << '/' << ratio.den << '\n'
                << p << metric << "_pct=" << pct << '\n';
        };
        emit("mode_switches", r.mode_switches);
        emit("context_switches", r.context_switches);
    }
    return out.str();
}

OverheadReport overhead_report(const ScenarioFile& scenario, std::optional<std::uint64_t> seed) {
    OverheadReport report;
    for (auto scheme : kAllSchemes) {
        const auto run = run_scenario(scheme, scenario, seed);
        report.rows.emplace_back(scheme, run_totals(run.trace));
    }
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        for (std::size_t j = i + 1; j < report.rows.size(); ++j) {
            const auto& a = report.rows[i].second.totals;
            const auto& b = report.rows[j].second.totals;
            report.reductions.push_back({report.rows[i].first, report.rows[j].first,
                                         reduction(a.mode_switches, b.mode_switches),
                                         reduction(a.context_switches, b.context_switches)});
        }
    }
    return report;
}

std::vector<std::string> check_expectations(const ScenarioFile& scenario, const RunResult& run) {
    std::vector<std::string> failures;
    const std::string scheme(to_string(run.scheme));
    for (const auto& e : scenario.expectations) {
        if (e.scheme && *e.scheme != run.scheme) continue;
        const std::string where = scheme + " fault " + std::to_string(e.fault) + ": ";
        if (e.fault >= run.faults.size()) {
            failures.push_back(where + "fault never happened");
            continue;
        }
        if (e.verdict) {
            const auto& got = run.faults[e.fault].verdict;
            if (!got || got->code != *e.verdict) {
                failures.push_back(where + "verdict " +
                                   (got ? std::string(to_string(got->code)) : "none") +
                                   ", expected " + std::string(to_string(*e.verdict)));
            }
        }
        if (!e.mode_switches && !e.context_switches && !e.ipc_messages && !e.pager_invocations) {
            continue;
        }
        CycleMetrics m;
        try {
            m = cycle_metrics(run.trace, e.fault);
        } catch (const SimError& err) {
            failures.push_back(where + err.what());
            continue;
        }
        auto cmp = [&](const char* name, std::optional<std::uint32_t> want, std::uint32_t got) {
            if (want && *want != got) {
                failures.push_back(where + name + "=" + std::to_string(got) + ", expected " +
                                   std::to_string(*want));
            }
        };
        cmp("mode", e.mode_switches, m.mode_switches);
        cmp("ctx", e.context_switches, m.context_switches);
        cmp("ipc", e.ipc_messages, m.ipc_messages);
        cmp("invocations", e.pager_invocations, m.pager_invocations);
    }
    return failures;
}

}  // namespace mpsim
