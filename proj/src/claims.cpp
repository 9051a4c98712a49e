#include "claims.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "fault_dispatch.hpp"
#include "schemes.hpp"

namespace mpsim {

namespace {

[[noreturn]] void missing(const std::string& what) {
    throw SimError(ErrorCode::MissingFixture, what);
}

std::vector<std::string> split_quoted(std::string_view line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool have = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            have = true;
        } else if (!quoted && (c == ' ' || c == '\t')) {
            if (have) out.push_back(std::move(cur));
            cur.clear();
            have = false;
        } else {
            cur += c;
            have = true;
        }
    }
    if (quoted) throw ParseError(line_no, "unterminated quote");
    if (have) out.push_back(std::move(cur));
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) missing("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t to_u64(std::string_view s) {
    return std::stoull(std::string(s), nullptr, 0);
}

const std::string& need(const ClaimEntry& c, std::string_view key) {
    auto it = c.expected.find(key);
    if (it == c.expected.end()) {
        throw SimError(ErrorCode::SemanticError,
                       "claim " + c.id + " has no " + std::string(key) + "=");
    }
    return it->second;
}

struct Context {
    std::filesystem::path dir;
    const ReproduceOptions& options;

    ScenarioFile scenario(const ClaimEntry& c) const {
        if (c.fixture.empty()) {
            throw SimError(ErrorCode::SemanticError, "claim " + c.id + " needs fixture=");
        }
        return load_scenario(dir / c.fixture);
    }

    Trace measured(const Trace& t) const {
        if (!options.mutate_trace) return t;
        std::vector<TraceEvent> events(t.events().begin(), t.events().end());
        options.mutate_trace(events);
        return Trace(std::move(events));
    }
};

std::string mode_ctx(const CycleMetrics& m) {
    return std::to_string(m.mode_switches) + "/" + std::to_string(m.context_switches);
}

std::string metrics_or_error(const Trace& t, std::size_t idx,
                             const std::function<std::string(const CycleMetrics&)>& fmt) {
    try {
        return fmt(cycle_metrics(t, idx));
    } catch (const SimError& e) {
        return std::string("error(") + to_string(e.code()) + ")";
    }
}

ClaimResult check_table(const ClaimEntry& c, const Context& ctx) {
    const auto sc = ctx.scenario(c);
    ClaimResult r{c.id, true, {}};
    for (auto scheme : kAllSchemes) {
        const std::string name(to_string(scheme));
        const auto& want = need(c, name);
        const auto trace = ctx.measured(run_scenario(scheme, sc).trace);
        const auto got = metrics_or_error(trace, 0, mode_ctx);
        r.detail += name + "=" + got + " ";
        r.passed &= got == want;
    }
    return r;
}

bool parse_fraction(std::string_view s, std::int64_t& n, std::int64_t& d) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return false;
    n = std::stoll(std::string(s.substr(0, slash)));
    d = std::stoll(std::string(s.substr(slash + 1)));
    return d != 0;
}

ClaimResult check_reduction(const ClaimEntry& c, const Context& ctx) {
    const auto sc = ctx.scenario(c);
    const auto scheme = parse_scheme(need(c, "scheme"));
    const auto baseline = parse_scheme(need(c, "baseline"));
    if (!scheme || !baseline) throw SimError(ErrorCode::SemanticError, "claim " + c.id + ": bad scheme");

    ClaimResult r{c.id, true, {}};
    CycleMetrics a, b;
    try {
        a = cycle_metrics(ctx.measured(run_scenario(*scheme, sc).trace), 0);
        b = cycle_metrics(ctx.measured(run_scenario(*baseline, sc).trace), 0);
    } catch (const SimError& e) {
        return {c.id, false, e.what()};
    }
    auto one = [&](const char* key, std::int64_t value, std::int64_t base) {
        std::int64_t n = 0, d = 0;
        if (!parse_fraction(need(c, key), n, d)) {
            throw SimError(ErrorCode::SemanticError, "claim " + c.id + ": bad fraction");
        }
        const Ratio got = reduction(value, base);
        r.detail += std::string(key) + "=" + std::to_string(got.num) + "/" + std::to_string(got.den) + " ";
        r.passed &= got.defined() && got.equals(n, d);
    };
    one("mode", a.mode_switches, b.mode_switches);
    one("ctx", a.context_switches, b.context_switches);
    return r;
}

std::optional<Rid> linear_scan(const LayoutConfig& cfg, Vaddr v) {
    for (Rid r = 0; r < cfg.region_count; ++r) {
        const Vaddr lo = cfg.user_base + Vaddr{r} * cfg.region_size;
        if (v >= lo && v < lo + cfg.region_size) return r;
    }
    return std::nullopt;
}

ClaimResult check_region_forms(const ClaimEntry& c, const Context&) {
    const auto samples = to_u64(need(c, "samples"));
    const auto want = to_u64(need(c, "mismatches"));
    std::mt19937_64 rng(to_u64(need(c, "seed")));
    std::uint64_t bad = 0;
    for (const auto& cfg : {LayoutConfig::standard(), LayoutConfig::small()}) {
        std::uniform_int_distribution<Vaddr> pick(cfg.user_base, cfg.user_end() - 1);
        for (std::uint64_t i = 0; i < samples; ++i) {
            const Vaddr v = pick(rng);
            const auto div = region_id_of(cfg, v);
            if (!div || div != region_id_of_shift(cfg, v) || div != linear_scan(cfg, v)) ++bad;
        }
    }
    return {c.id, bad == want, "mismatches=" + std::to_string(bad)};
}

enum class Case { KernelRange, Unassigned, NonAccepting, Revoked, AcceptedAbsent, AcceptedPresent };

VerdictCode verdict_of(FaultClass k) {
    switch (k) {
        case FaultClass::KernelRange: return VerdictCode::KernelRange;
        case FaultClass::NoPager: return VerdictCode::NoPager;
        case FaultClass::NotAccepted: return VerdictCode::NotAccepted;
        case FaultClass::Present: return VerdictCode::ResumedPresent;
        case FaultClass::Absent: return VerdictCode::Dispatched;
    }
    return VerdictCode::Dispatched;
}

ClaimResult check_classification(const ClaimEntry& c, const Context&) {
    std::vector<std::string> want;
    {
        std::stringstream ss(need(c, "verdicts"));
        std::string item;
        while (std::getline(ss, item, ',')) want.push_back(item);
    }
    const std::vector<Case> cases{Case::KernelRange,  Case::Unassigned,     Case::NonAccepting,
                                  Case::Revoked,      Case::AcceptedAbsent, Case::AcceptedPresent};
    if (want.size() != cases.size()) {
        throw SimError(ErrorCode::SemanticError, "claim " + c.id + ": need six verdicts");
    }
    const auto cfg = LayoutConfig::small();
    const Tid pager{2};
    const Asid asid{1};
    std::size_t wrong = 0;
    for (Rid rid = 0; rid < cfg.region_count; ++rid) {
        for (std::size_t i = 0; i < cases.size(); ++i) {
            Trace trace;
            Mmu mmu(trace);
            auto& as = mmu.create_space(asid, cfg);
            RefusalSet refusals;
            const Vaddr first = region_start(cfg, rid);
            Vaddr probe = first;
            switch (cases[i]) {
                case Case::KernelRange: probe = cfg.user_end() + Vaddr{rid} * cfg.region_size; break;
                case Case::Unassigned: break;
                case Case::NonAccepting:
                    as.regions.assign(rid, pager);
                    refusals.add(asid, rid, pager);
                    break;
                case Case::Revoked:
                    as.regions.assign(rid, pager);
                    mmu.map_page(asid, first, 1, 0);
                    mmu.unmap_page(asid, first, true);
                    break;
                case Case::AcceptedAbsent:
                    as.regions.assign(rid, pager);
                    mmu.map_page(asid, first, 1, 0);
                    probe = first + kPageSize;
                    break;
                case Case::AcceptedPresent:
                    as.regions.assign(rid, pager);
                    mmu.map_page(asid, first, 1, 0);
                    break;
            }
            const auto got = to_string(verdict_of(classify(as, probe, refusals).kind));
            if (got != want[i]) ++wrong;
        }
    }
    return {c.id, wrong == 0, "wrong=" + std::to_string(wrong)};
}

ClaimResult check_contract(const ClaimEntry& c, const Context&) {
    const auto sequences = to_u64(need(c, "sequences"));
    const auto steps = to_u64(need(c, "steps"));
    const auto want = to_u64(need(c, "violations"));
    std::mt19937_64 rng(to_u64(need(c, "seed")));
    const auto cfg = LayoutConfig::small();
    const Asid asid{1};
    std::uint64_t violations = 0;
    std::uint64_t revoked_probes = 0;

    for (std::uint64_t s = 0; s < sequences; ++s) {
        Trace trace;
        Mmu mmu(trace);
        auto& as = mmu.create_space(asid, cfg);
        const RefusalSet none;
        for (std::uint64_t k = 0; k < steps; ++k) {
            const Rid rid = static_cast<Rid>(rng() % cfg.region_count);
            const Vaddr page = region_start(cfg, rid) + (rng() % cfg.pages_per_region) * kPageSize;
            const auto before = as.regions.lookup(rid).contract;
            switch (rng() % 3) {
                case 0: as.regions.assign(rid, Tid{static_cast<std::uint32_t>(2 + rng() % 2)}); break;
                case 1:
                    if (before != ContractState::Unassigned) mmu.map_page(asid, page, rng() % 64, 0);
                    break;
                default:
                    if (as.pages.entry(page).present) mmu.unmap_page(asid, page, rng() % 2 == 0);
                    break;
            }
            const auto after = as.regions.lookup(rid).contract;
            if (after != before && !is_allowed_transition(before, after)) ++violations;
            if (after == ContractState::Revoked) {
                // Every page of a revoked region is refused until reassignment.
                for (Vaddr p = region_start(cfg, rid); p < region_start(cfg, rid) + cfg.region_size;
                     p += kPageSize) {
                    ++revoked_probes;
                    if (classify(as, p, none).kind != FaultClass::NotAccepted) ++violations;
                }
            }
        }
    }
    return {c.id, violations == want,
            "violations=" + std::to_string(violations) +
                " revoked_probes=" + std::to_string(revoked_probes)};
}

ClaimResult check_footprint(const ClaimEntry& c, const Context&) {
    const RegionTable table(LayoutConfig::standard().region_count);
    const auto bytes = table.serialize_managers().size();
    const auto want = to_u64(need(c, "bytes"));
    const auto budget = to_u64(need(c, "budget"));
    return {c.id, bytes == want && bytes <= budget,
            "bytes=" + std::to_string(bytes) + " budget=" + std::to_string(budget)};
}

ClaimResult check_cross_scheme(const ClaimEntry& c, const Context& ctx) {
    const auto faults = to_u64(need(c, "faults"));
    const auto sc = random_resolved_workload(to_u64(need(c, "seed")), faults);

    std::vector<RunResult> runs;
    for (auto scheme : kAllSchemes) runs.push_back(run_scenario(scheme, sc));

    std::size_t mismatches = 0;
    std::size_t order = 0;
    const auto& ref = runs.front().final_pages;
    for (const auto& run : runs) {
        if (run.final_pages != ref) ++mismatches;
        if (fault_count(run.trace) != faults) ++mismatches;
    }
    auto metrics = [&](SchemeKind k, std::size_t i) {
        return cycle_metrics(ctx.measured(runs[static_cast<std::size_t>(k)].trace), i);
    };
    try {
        for (std::size_t i = 0; i < faults; ++i) {
            const auto mono = metrics(SchemeKind::Monolithic, i);
            const auto prop = metrics(SchemeKind::ProposedRegionDispatch, i);
            const auto l4re = metrics(SchemeKind::L4PlusL4Re, i);
            const bool ok = l4re.mode_switches > prop.mode_switches &&
                            l4re.context_switches > prop.context_switches &&
                            prop.mode_switches >= mono.mode_switches &&
                            prop.context_switches >= mono.context_switches;
            if (!ok) ++order;
        }
    } catch (const SimError& e) {
        return {c.id, false, e.what()};
    }
    const bool pass = mismatches == to_u64(need(c, "mismatches")) &&
                      order == to_u64(need(c, "order_violations"));
    return {c.id, pass,
            "mismatches=" + std::to_string(mismatches) + " order_violations=" + std::to_string(order)};
}

std::string run_text(SchemeKind scheme, const ScenarioFile& sc) {
    try {
        return run_scenario(scheme, sc).trace.to_text();
    } catch (const SimError& e) {
        return std::string("error: ") + e.what();
    }
}

ClaimResult check_determinism(const ClaimEntry& c, const Context& ctx) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(ctx.dir)) {
        if (e.path().extension() == ".scn") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    const auto want = to_u64(need(c, "differing"));
    std::size_t differing = 0;
    for (const auto& f : files) {
        const auto sc = load_scenario(f);
        for (auto scheme : kAllSchemes) {
            if (run_text(scheme, sc) != run_text(scheme, sc)) ++differing;
        }
    }
    return {c.id, !files.empty() && differing == want,
            "fixtures=" + std::to_string(files.size()) + " differing=" + std::to_string(differing)};
}

ClaimResult check_race(const ClaimEntry& c, const Context& ctx) {
    const auto sc = ctx.scenario(c);
    const auto trace = ctx.measured(run_scenario(SchemeKind::ProposedRegionDispatch, sc).trace);
    auto fmt = [](const CycleMetrics& m) {
        return mode_ctx(m) + "/" + std::to_string(m.pager_invocations) + "/" +
               std::to_string(m.ipc_messages);
    };
    const auto first = metrics_or_error(trace, 0, fmt);
    const auto second = metrics_or_error(trace, 1, fmt);
    return {c.id, first == need(c, "first") && second == need(c, "second"),
            "first=" + first + " second=" + second};
}

using Checker = ClaimResult (*)(const ClaimEntry&, const Context&);

const std::map<std::string, Checker, std::less<>>& checkers() {
    static const std::map<std::string, Checker, std::less<>> table{
        {"table", check_table},
        {"reduction", check_reduction},
        {"region-id-forms", check_region_forms},
        {"classification-table", check_classification},
        {"race", check_race},
        {"contract-machine", check_contract},
        {"footprint", check_footprint},
        {"cross-scheme", check_cross_scheme},
        {"determinism", check_determinism},
    };
    return table;
}

}  // namespace

std::vector<ClaimEntry> parse_claims(std::string_view text) {
    std::vector<ClaimEntry> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        const auto words = split_quoted(line, line_no);
        if (words.empty() || words.front().starts_with('#')) continue;
        if (words.size() < 2) throw ParseError(line_no, "claim needs an id and a kind");
        ClaimEntry c;
        c.id = words[0];
        c.kind = words[1];
        if (!checkers().contains(c.kind)) throw ParseError(line_no, "unknown claim kind '" + c.kind + "'");
        if (!ids.insert(c.id).second) throw ParseError(line_no, "duplicate claim " + c.id);
        for (std::size_t i = 2; i < words.size(); ++i) {
            const auto eq = words[i].find('=');
            if (eq == std::string::npos) throw ParseError(line_no, "expected key=value: " + words[i]);
            auto key = words[i].substr(0, eq);
            auto value = words[i].substr(eq + 1);
            if (key == "source") c.source = value;
            else if (key == "fixture") c.fixture = value;
            else c.expected[key] = value;
        }
        out.push_back(std::move(c));
    }
    return out;
}

bool ReproduceSummary::all_passed() const noexcept {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string ReproduceSummary::to_text() const {
    std::ostringstream out;
    std::size_t passed = 0;
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.id << "  " << r.detail << '\n';
        passed += r.passed;
    }
    out << passed << '/' << results.size() << " claims reproduced\n";
    return out.str();
}

ReproduceSummary reproduce_all(const std::filesystem::path& dir, const ReproduceOptions& options) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec) || std::filesystem::is_empty(dir, ec)) {
        missing("fixtures directory " + dir.string() + " is missing or empty");
    }
    const auto manifest = dir / "claims.txt";
    if (!std::filesystem::exists(manifest)) missing("no claims.txt in " + dir.string());
    const auto claims = parse_claims(read_file(manifest));
    for (const auto& c : claims) {
        if (!c.fixture.empty() && !std::filesystem::exists(dir / c.fixture)) {
            missing("claim " + c.id + ": fixture " + c.fixture + " not found");
        }
    }

    const Context ctx{dir, options};
    ReproduceSummary summary;
    for (const auto& c : claims) {
        summary.results.push_back(checkers().at(c.kind)(c, ctx));
    }
    return summary;
}

ScenarioFile random_resolved_workload(std::uint64_t seed, std::size_t faults) {
    std::mt19937_64 rng(seed);
    ScenarioFile sc;

    // Per space: two pagers (first), then one applicant per pager. Each
    // applicant only touches the regions of its own pager.
    struct Worker {
        Tid tid;
        Asid asid;
        std::vector<Rid> regions;
    };
    std::vector<Worker> workers;
    std::uint32_t next_tid = 1;
    for (std::uint32_t a = 1; a <= 2; ++a) {
        const Asid asid{a};
        const Tid pagers[2] = {Tid{next_tid}, Tid{next_tid + 1}};
        next_tid += 2;
        for (Tid p : pagers) {
            sc.threads.push_back({p, asid, Role::Pager, std::nullopt});
            PagerDecl decl{p, {}};
            decl.behavior.marker.kind = MarkerRule::Kind::PageNumber;
            sc.pagers.push_back(decl);
        }
        for (int i = 0; i < 2; ++i) {
            Worker w{Tid{next_tid++}, asid, {}};
            sc.threads.push_back({w.tid, asid, Role::Applicant, pagers[i]});
            for (Rid r = 0; r < 3; ++r) {
                const Rid rid = static_cast<Rid>(i * 3 + r);
                w.regions.push_back(rid);
                Step s;
                s.kind = StepKind::Assign;
                s.tid = pagers[i];
                s.asid = asid;
                s.rid = rid;
                sc.script.push_back(s);
            }
            workers.push_back(std::move(w));
        }
    }

    const auto layout = sc.effective_layout();
    std::set<std::pair<Asid, Vaddr>> touched;
    std::vector<std::pair<const Worker*, Vaddr>> history;
    std::size_t made = 0;
    while (made < faults) {
        const auto& w = workers[rng() % workers.size()];
        Step s;
        s.kind = StepKind::Access;
        s.tid = w.tid;
        s.asid = w.asid;
        s.access = rng() % 2 ? AccessType::Write : AccessType::Read;
        if (!history.empty() && rng() % 4 == 0) {
            // Touch an already resolved page again; this one must not fault.
            const auto& [owner, vaddr] = history[rng() % history.size()];
            s.tid = owner->tid;
            s.asid = owner->asid;
            s.vaddr = vaddr + rng() % kPageSize;
        } else {
            const Rid rid = w.regions[rng() % w.regions.size()];
            const Vaddr page = region_start(layout, rid) + (rng() % layout.pages_per_region) * kPageSize;
            if (!touched.insert({w.asid, page}).second) continue;
            history.emplace_back(&w, page);
            s.vaddr = page + rng() % kPageSize;
            ++made;
        }
        sc.script.push_back(s);
    }
    return sc;
}

}  // namespace mpsim
