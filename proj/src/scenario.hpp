#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "address_space.hpp"
#include "pagers.hpp"
#include "scheme_kind.hpp"
#include "sim_core.hpp"
#include "trace.hpp"

namespace mpsim {

struct ThreadDecl {
    Tid tid = kNoThread;
    Asid asid{0};
    Role role = Role::Applicant;
    std::optional<Tid> pager;  // explicit per-thread pager (single-pager scheme)

    bool operator==(const ThreadDecl&) const = default;
};

struct PagerDecl {
    Tid tid = kNoThread;
    PagerBehavior behavior;

    bool operator==(const PagerDecl&) const = default;
};

struct RefusalDecl {
    Asid asid{0};
    Rid rid = 0;
    Tid pager = kNoThread;

    bool operator==(const RefusalDecl&) const = default;
};

struct DbRangeDecl {
    Asid asid{0};
    Vaddr start = 0;
    Vaddr end = 0;
    Tid target = kNoThread;

    bool operator==(const DbRangeDecl&) const = default;
};

enum class StepKind : std::uint8_t {
    Assign,    // consumer assigns a region manager
    Access,    // memory access; any fault runs to completion
    Fault,     // access whose fault stops once a server holds the message
    Trap,      // access whose fault stops right after the kernel entry
    Dispatch,  // continue a trapped thread's zero-level path
    Serve,     // let servers process every pending message
    Unmap,     // pager-initiated unmap
};

struct Step {
    StepKind kind = StepKind::Access;
    Tid tid = kNoThread;
    Asid asid{0};
    Rid rid = 0;
    Vaddr vaddr = 0;
    AccessType access = AccessType::Read;
    bool revoke = false;

    bool operator==(const Step&) const = default;
};

struct Expectation {
    std::size_t fault = 0;
    std::optional<SchemeKind> scheme;  // unset: applies to every scheme
    std::optional<VerdictCode> verdict;
    std::optional<std::uint32_t> mode_switches;
    std::optional<std::uint32_t> context_switches;
    std::optional<std::uint32_t> ipc_messages;
    std::optional<std::uint32_t> pager_invocations;

    bool operator==(const Expectation&) const = default;
};

struct ScenarioFile {
    std::optional<LayoutConfig> layout;
    std::optional<Frame> frame_limit;
    std::vector<ThreadDecl> threads;
    std::vector<PagerDecl> pagers;
    std::vector<RefusalDecl> refusals;
    std::vector<DbRangeDecl> db_ranges;
    std::vector<Step> script;
    std::vector<Expectation> expectations;

    LayoutConfig effective_layout() const { return layout.value_or(LayoutConfig::standard()); }
    const ThreadDecl* find_thread(Tid tid) const;
    const PagerDecl* find_pager(Tid tid) const;

    bool operator==(const ScenarioFile&) const = default;
};

// Throws ParseError (with line number) for malformed lines and
// SimError(SemanticError) for references to undeclared ids and similar.
ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::filesystem::path& path);

// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioFile& scenario);

}  // namespace mpsim
