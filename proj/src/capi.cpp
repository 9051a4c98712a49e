#include "mpsim/mpsim.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "claims.hpp"
#include "fault_dispatch.hpp"
#include "schemes.hpp"

struct mpsim_scenario {
    mpsim::ScenarioFile file;
};

struct mpsim_run {
    mpsim::RunResult result;
};

struct mpsim_machine {
    mpsim::Engine engine;
    mpsim::Mmu mmu{engine.trace()};
    mpsim::FaultDispatcher kernel{engine, mmu, mpsim::DispatchMode::RegionTable};
    mpsim::LayoutConfig layout;
};

namespace {

thread_local std::string g_last_error;

mpsim_status fail(mpsim_status s, const char* what) {
    g_last_error = what;
    return s;
}

mpsim_status from_code(mpsim::ErrorCode code) {
    return static_cast<mpsim_status>(-1 - static_cast<int>(code));
}

// Runs `fn` and turns exceptions into status codes.
template <class Fn>
mpsim_status guarded(Fn&& fn) noexcept {
    try {
        g_last_error.clear();
        return fn();
    } catch (const mpsim::ParseError& e) {
        return fail(MPSIM_ERR_PARSE, e.what());
    } catch (const mpsim::SimError& e) {
        return fail(from_code(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(MPSIM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MPSIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MPSIM_ERR_INTERNAL, "unknown exception");
    }
}

#define MPSIM_REQUIRE(cond)                                                  \
    do {                                                                     \
        if (!(cond)) return fail(MPSIM_ERR_INVALID_ARGUMENT, #cond " is false"); \
    } while (0)

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

bool valid_scheme(mpsim_scheme s) {
    return s >= MPSIM_SCHEME_MONOLITHIC && s <= MPSIM_SCHEME_L4RE;
}

mpsim::LayoutConfig to_layout(const mpsim_layout& l) {
    mpsim::LayoutConfig cfg;
    cfg.user_base = l.user_base;
    cfg.region_size = l.region_size;
    cfg.region_count = l.region_count;
    cfg.pages_per_region = l.pages_per_region;
    cfg.validate();
    return cfg;
}

mpsim_layout from_layout(const mpsim::LayoutConfig& cfg) {
    return {cfg.user_base, cfg.region_size, cfg.region_count, cfg.pages_per_region};
}

mpsim_cycle_metrics from_metrics(const mpsim::CycleMetrics& m) {
    return {m.mode_switches, m.context_switches, m.ipc_messages, m.pager_invocations};
}

std::optional<std::uint64_t> opt_seed(const uint64_t* seed) {
    if (!seed) return std::nullopt;
    return *seed;
}

void make_current(mpsim_machine& m, mpsim::Tid tid) {
    if (m.engine.thread(tid).state == mpsim::ThreadState::Terminated) {
        throw mpsim::SimError(mpsim::ErrorCode::NotRunnable,
                              "thread " + std::to_string(mpsim::raw(tid)) + " was terminated");
    }
    if (m.engine.cpu_owner() == tid && m.engine.cpu_mode() == mpsim::CpuMode::User) return;
    auto scheduler = mpsim::Scheduler::deterministic({tid});
    m.engine.schedule_next(scheduler);
}

}  // namespace

extern "C" {

const char* mpsim_last_error(void) { return g_last_error.c_str(); }

const char* mpsim_status_string(mpsim_status status) {
    switch (status) {
        case MPSIM_OK: return "ok";
        case MPSIM_WARN_REVOKE_INEFFECTIVE: return "revoke ineffective";
        case MPSIM_WARN_KERNEL_RANGE: return "kernel range";
        case MPSIM_PAGE_FAULT: return "page fault";
        case MPSIM_ERR_INTERNAL: return "internal error";
        default: break;
    }
    const int idx = -1 - static_cast<int>(status);
    if (idx >= 0 && idx <= static_cast<int>(mpsim::ErrorCode::Io)) {
        return mpsim::to_string(static_cast<mpsim::ErrorCode>(idx));
    }
    return "unknown status";
}

void mpsim_free_string(char* text) { std::free(text); }

const char* mpsim_scheme_name(mpsim_scheme scheme) {
    if (!valid_scheme(scheme)) return "?";
    // Names are string literals, hence NUL terminated.
    return mpsim::to_string(static_cast<mpsim::SchemeKind>(scheme)).data();
}

mpsim_status mpsim_scheme_parse(const char* name, mpsim_scheme* out) {
    MPSIM_REQUIRE(name && out);
    const auto k = mpsim::parse_scheme(name);
    if (!k) return fail(MPSIM_ERR_INVALID_ARGUMENT, "unknown scheme");
    *out = static_cast<mpsim_scheme>(*k);
    return MPSIM_OK;
}

mpsim_layout mpsim_layout_standard(void) { return from_layout(mpsim::LayoutConfig::standard()); }
mpsim_layout mpsim_layout_small(void) { return from_layout(mpsim::LayoutConfig::small()); }

mpsim_status mpsim_region_id_of(const mpsim_layout* layout, uint64_t vaddr, uint32_t* rid) {
    MPSIM_REQUIRE(layout && rid);
    return guarded([&] {
        const auto r = mpsim::region_id_of(to_layout(*layout), vaddr);
        if (!r) return MPSIM_WARN_KERNEL_RANGE;
        *rid = *r;
        return MPSIM_OK;
    });
}

mpsim_status mpsim_scenario_parse(const char* text, mpsim_scenario** out) {
    MPSIM_REQUIRE(text && out);
    return guarded([&] {
        *out = new mpsim_scenario{mpsim::parse_scenario(text)};
        return MPSIM_OK;
    });
}

mpsim_status mpsim_scenario_load(const char* path, mpsim_scenario** out) {
    MPSIM_REQUIRE(path && out);
    return guarded([&] {
        *out = new mpsim_scenario{mpsim::load_scenario(path)};
        return MPSIM_OK;
    });
}

mpsim_status mpsim_scenario_serialize(const mpsim_scenario* scenario, char** out) {
    MPSIM_REQUIRE(scenario && out);
    return guarded([&] {
        *out = dup_string(mpsim::serialize_scenario(scenario->file));
        return MPSIM_OK;
    });
}

void mpsim_scenario_free(mpsim_scenario* scenario) { delete scenario; }

mpsim_status mpsim_run_scenario(const mpsim_scenario* scenario, mpsim_scheme scheme,
                                const uint64_t* seed, mpsim_run** out) {
    MPSIM_REQUIRE(scenario && out && valid_scheme(scheme));
    return guarded([&] {
        *out = new mpsim_run{mpsim::run_scenario(static_cast<mpsim::SchemeKind>(scheme),
                                                 scenario->file, opt_seed(seed))};
        return MPSIM_OK;
    });
}

void mpsim_run_free(mpsim_run* run) { delete run; }

size_t mpsim_run_fault_count(const mpsim_run* run) {
    return run ? run->result.faults.size() : 0;
}

mpsim_status mpsim_run_cycle_metrics(const mpsim_run* run, size_t fault, mpsim_cycle_metrics* out) {
    MPSIM_REQUIRE(run && out);
    return guarded([&] {
        *out = from_metrics(mpsim::cycle_metrics(run->result.trace, fault));
        return MPSIM_OK;
    });
}

mpsim_status mpsim_run_totals(const mpsim_run* run, mpsim_totals* out) {
    MPSIM_REQUIRE(run && out);
    return guarded([&] {
        const auto t = mpsim::run_totals(run->result.trace);
        *out = {t.faults, t.completed, from_metrics(t.totals)};
        return MPSIM_OK;
    });
}

mpsim_status mpsim_run_trace_text(const mpsim_run* run, char** out) {
    MPSIM_REQUIRE(run && out);
    return guarded([&] {
        *out = dup_string(run->result.trace.to_text());
        return MPSIM_OK;
    });
}

mpsim_status mpsim_run_page_table_text(const mpsim_run* run, char** out) {
    MPSIM_REQUIRE(run && out);
    return guarded([&] {
        *out = dup_string(run->result.page_table_text());
        return MPSIM_OK;
    });
}

size_t mpsim_run_warning_count(const mpsim_run* run) {
    return run ? run->result.warnings.size() : 0;
}

mpsim_status mpsim_run_check(const mpsim_scenario* scenario, const mpsim_run* run, char** failures,
                             size_t* failure_count) {
    MPSIM_REQUIRE(scenario && run && failures && failure_count);
    return guarded([&] {
        const auto list = mpsim::check_expectations(scenario->file, run->result);
        std::string text;
        for (const auto& f : list) text += f + '\n';
        *failures = dup_string(text);
        *failure_count = list.size();
        return MPSIM_OK;
    });
}

mpsim_status mpsim_report(const mpsim_scenario* scenario, const uint64_t* seed,
                          mpsim_report_format format, char** out) {
    MPSIM_REQUIRE(scenario && out);
    MPSIM_REQUIRE(format == MPSIM_REPORT_TABLE || format == MPSIM_REPORT_KV);
    return guarded([&] {
        const auto report = mpsim::overhead_report(scenario->file, opt_seed(seed));
        *out = dup_string(format == MPSIM_REPORT_KV ? report.to_kv() : report.to_table());
        return MPSIM_OK;
    });
}

mpsim_status mpsim_reproduce(const char* fixtures_dir, char** summary, int* all_passed) {
    MPSIM_REQUIRE(fixtures_dir && summary && all_passed);
    return guarded([&] {
        const auto s = mpsim::reproduce_all(fixtures_dir);
        *summary = dup_string(s.to_text());
        *all_passed = s.all_passed() ? 1 : 0;
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_create(const mpsim_layout* layout, mpsim_machine** out) {
    MPSIM_REQUIRE(out);
    return guarded([&] {
        auto* m = new mpsim_machine;
        try {
            m->layout = layout ? to_layout(*layout) : mpsim::LayoutConfig::standard();
        } catch (...) {
            delete m;
            throw;
        }
        *out = m;
        return MPSIM_OK;
    });
}

void mpsim_machine_free(mpsim_machine* machine) { delete machine; }

mpsim_status mpsim_machine_add_thread(mpsim_machine* m, uint32_t tid, uint32_t asid,
                                      mpsim_role role) {
    MPSIM_REQUIRE(m && tid != 0);
    MPSIM_REQUIRE(role == MPSIM_ROLE_APPLICANT || role == MPSIM_ROLE_PAGER);
    return guarded([&] {
        if (m->engine.has_thread(mpsim::Tid{tid})) {
            return fail(MPSIM_ERR_INVALID_ARGUMENT, "thread already exists");
        }
        const mpsim::Asid a{asid};
        if (!m->mmu.has_space(a)) m->mmu.create_space(a, m->layout);
        if (role == MPSIM_ROLE_PAGER) {
            m->engine.add_thread(mpsim::Tid{tid}, a, mpsim::Role::Pager,
                                 mpsim::ThreadState::BlockedOnReceive);
        } else {
            m->engine.add_thread(mpsim::Tid{tid}, a, mpsim::Role::Applicant);
        }
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_assign(mpsim_machine* m, uint32_t asid, uint32_t rid, uint32_t pager) {
    MPSIM_REQUIRE(m);
    return guarded([&] {
        m->kernel.assign_manager(mpsim::Asid{asid}, rid, mpsim::Tid{pager});
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_lookup(const mpsim_machine* m, uint32_t asid, uint32_t rid,
                                  uint32_t* manager, mpsim_contract* contract) {
    MPSIM_REQUIRE(m && manager && contract);
    return guarded([&] {
        const auto& slot = m->kernel.lookup_manager(mpsim::Asid{asid}, rid);
        *manager = mpsim::raw(slot.manager);
        *contract = static_cast<mpsim_contract>(slot.contract);
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_map(mpsim_machine* m, uint32_t asid, uint64_t vaddr, uint64_t frame,
                               uint32_t marker) {
    MPSIM_REQUIRE(m);
    return guarded([&] {
        m->mmu.map_page(mpsim::Asid{asid}, vaddr, frame, marker);
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_unmap(mpsim_machine* m, uint32_t asid, uint64_t vaddr, int revoke) {
    MPSIM_REQUIRE(m);
    return guarded([&] {
        const auto r = m->mmu.unmap_page(mpsim::Asid{asid}, vaddr, revoke != 0);
        return r == mpsim::UnmapOutcome::RevokeIneffective ? MPSIM_WARN_REVOKE_INEFFECTIVE
                                                            : MPSIM_OK;
    });
}

mpsim_status mpsim_machine_translate(const mpsim_machine* m, uint32_t asid, uint64_t vaddr,
                                     int write, uint64_t* frame) {
    MPSIM_REQUIRE(m && frame);
    return guarded([&] {
        const mpsim::MemoryAccess acc{mpsim::kNoThread, vaddr,
                                      write ? mpsim::AccessType::Write : mpsim::AccessType::Read};
        const auto r = m->mmu.translate(mpsim::Asid{asid}, acc);
        if (const auto* f = std::get_if<mpsim::Frame>(&r)) {
            *frame = *f;
            return MPSIM_OK;
        }
        return MPSIM_PAGE_FAULT;
    });
}

mpsim_status mpsim_machine_handle_fault(mpsim_machine* m, uint32_t tid, uint64_t vaddr, int write,
                                        mpsim_verdict* verdict, uint32_t* pager) {
    MPSIM_REQUIRE(m && verdict && pager);
    return guarded([&] {
        const mpsim::Tid t{tid};
        make_current(*m, t);
        const mpsim::FaultEvent ev{t, m->engine.thread(t).asid, vaddr,
                                   write ? mpsim::AccessType::Write : mpsim::AccessType::Read};
        const auto v = m->kernel.handle_fault(ev);
        *verdict = static_cast<mpsim_verdict>(v.code);
        *pager = mpsim::raw(v.pager);
        return v.code == mpsim::VerdictCode::KernelRange ? MPSIM_WARN_KERNEL_RANGE : MPSIM_OK;
    });
}

mpsim_status mpsim_machine_receive(mpsim_machine* m, uint32_t pager, mpsim_fault_message* out) {
    MPSIM_REQUIRE(m && out);
    return guarded([&] {
        const mpsim::Tid p{pager};
        const mpsim::Message msg = m->engine.deliver_head(p);
        m->engine.retire_head(p);
        *out = {mpsim::raw(msg.payload.faulter), mpsim::raw(msg.payload.asid), msg.payload.vaddr,
                msg.payload.access == mpsim::AccessType::Write ? 1 : 0, msg.payload.marker};
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_pager_reply(mpsim_machine* m, uint32_t pager, uint32_t faulter,
                                       const uint64_t* frame, uint32_t marker) {
    MPSIM_REQUIRE(m);
    return guarded([&] {
        std::optional<mpsim::MapRequest> map;
        if (frame) map = mpsim::MapRequest{*frame, marker};
        m->kernel.pager_reply(mpsim::Tid{pager}, mpsim::Tid{faulter}, map);
        return MPSIM_OK;
    });
}

mpsim_status mpsim_machine_trace_text(const mpsim_machine* m, char** out) {
    MPSIM_REQUIRE(m && out);
    return guarded([&] {
        *out = dup_string(m->engine.trace().to_text());
        return MPSIM_OK;
    });
}

}  // extern "C"
