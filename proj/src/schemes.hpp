#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fault_dispatch.hpp"
#include "scenario.hpp"
#include "scheme_kind.hpp"
#include "trace.hpp"

namespace mpsim {

struct CycleMetrics {
    std::uint32_t mode_switches = 0;
    std::uint32_t context_switches = 0;
    std::uint32_t ipc_messages = 0;
    std::uint32_t pager_invocations = 0;

    CycleMetrics& operator+=(const CycleMetrics& o) noexcept {
        mode_switches += o.mode_switches;
        context_switches += o.context_switches;
        ipc_messages += o.ipc_messages;
        pager_invocations += o.pager_invocations;
        return *this;
    }
    bool operator==(const CycleMetrics&) const = default;
};

using PageSnapshot = std::map<Asid, std::vector<std::pair<Vaddr, PageTableEntry>>>;

struct RunResult {
    SchemeKind scheme = SchemeKind::ProposedRegionDispatch;
    Trace trace;
    std::vector<FaultRecord> faults;
    PageSnapshot final_pages;  // present entries per address space
    std::vector<std::string> warnings;

    std::string page_table_text() const;
};

// Executes the scenario script under `scheme`. With a seed, accesses of
// different threads are interleaved by a seeded round-robin scheduler (the
// script must then contain only accesses and assignments).
RunResult run_scenario(SchemeKind scheme, const ScenarioFile& scenario,
                       std::optional<std::uint64_t> seed = std::nullopt);

// Counts the events attributed to fault `fault_index` between its trap and the
// faulter's return to user mode. Throws SimError(IncompleteCycle) when the
// faulter never got back to user mode.
CycleMetrics cycle_metrics(const Trace& trace, std::size_t fault_index);

std::size_t fault_count(const Trace& trace);

struct RunTotals {
    std::size_t faults = 0;
    std::size_t completed = 0;
    CycleMetrics totals;  // sum over completed cycles
};

RunTotals run_totals(const Trace& trace);

struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 0;

    bool defined() const noexcept { return den != 0; }
    double percent() const noexcept { return den == 0 ? 0.0 : 100.0 * double(num) / double(den); }
    // Exact rational comparison.
    bool equals(std::int64_t n, std::int64_t d) const noexcept { return num * d == n * den; }
};

struct Reduction {
    SchemeKind scheme;
    SchemeKind baseline;
    Ratio mode_switches;
    Ratio context_switches;
};

// (baseline - value) / baseline; undefined (zero denominator) for a zero baseline.
Ratio reduction(std::int64_t value, std::int64_t baseline) noexcept;

struct OverheadReport {
    std::vector<std::pair<SchemeKind, RunTotals>> rows;
    std::vector<Reduction> reductions;

    const RunTotals& totals(SchemeKind scheme) const;
    std::string to_table() const;
    std::string to_kv() const;
};

OverheadReport overhead_report(const ScenarioFile& scenario,
                               std::optional<std::uint64_t> seed = std::nullopt);

// Empty when every expectation applicable to the run's scheme holds.
std::vector<std::string> check_expectations(const ScenarioFile& scenario, const RunResult& run);

}  // namespace mpsim
