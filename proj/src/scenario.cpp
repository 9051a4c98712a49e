#include "scenario.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mpsim {

const ThreadDecl* ScenarioFile::find_thread(Tid tid) const {
    for (const auto& t : threads) {
        if (t.tid == tid) return &t;
    }
    return nullptr;
}

const PagerDecl* ScenarioFile::find_pager(Tid tid) const {
    for (const auto& p : pagers) {
        if (p.tid == tid) return &p;
    }
    return nullptr;
}

namespace {

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        words.push_back(line.substr(i, j - i));
        i = j;
    }
    return words;
}

class LineParser {
public:
    LineParser(ScenarioFile& out) : out_(out) {}

    void parse_line(std::size_t lineno, std::string_view line);
    void finish();

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }
    [[noreturn]] void semantic(const std::string& msg) const {
        throw SimError(ErrorCode::SemanticError, "line " + std::to_string(line_) + ": " + msg);
    }

    std::uint64_t number(std::string_view text) const;
    Tid tid(std::string_view text) const;
    Asid asid(std::string_view text) const;
    Vaddr address(std::string_view text) const;
    AccessType access(std::string_view text) const;
    std::map<std::string_view, std::string_view> options(
        const std::vector<std::string_view>& words, std::size_t first,
        std::initializer_list<std::string_view> allowed) const;
    void expect_args(const std::vector<std::string_view>& words, std::size_t n) const;

    const ThreadDecl& declared(Tid t) const;
    void require_asid(Asid a) const;
    void require_role(Tid t, Role role, std::string_view what) const;

    void layout(const std::vector<std::string_view>& w);
    void thread(const std::vector<std::string_view>& w);
    void pager(const std::vector<std::string_view>& w);
    void backing(const std::vector<std::string_view>& w);
    void assign(const std::vector<std::string_view>& w);
    void refuse(const std::vector<std::string_view>& w);
    void dbrange(const std::vector<std::string_view>& w);
    void memory_step(StepKind kind, const std::vector<std::string_view>& w);
    void dispatch(const std::vector<std::string_view>& w);
    void unmap(const std::vector<std::string_view>& w);
    void expect(const std::vector<std::string_view>& w);

    ScenarioFile& out_;
    std::size_t line_ = 0;
    bool seen_directive_ = false;
    std::set<Frame> backing_frames_;
};

std::uint64_t LineParser::number(std::string_view text) const {
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        text.remove_prefix(2);
        base = 16;
    }
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        fail("expected a number, got '" + std::string(text) + "'");
    }
    return value;
}

Tid LineParser::tid(std::string_view text) const {
    const auto v = number(text);
    if (v == 0 || v > 0xffffffffu) fail("thread id must be in 1..2^32-1");
    return Tid{static_cast<std::uint32_t>(v)};
}

Asid LineParser::asid(std::string_view text) const {
    const auto v = number(text);
    if (v > 0xffffffffu) fail("address space id out of range");
    return Asid{static_cast<std::uint32_t>(v)};
}

Vaddr LineParser::address(std::string_view text) const {
    const auto v = number(text);
    if (v >= kAddressLimit) fail("address outside the 32-bit address space");
    return v;
}

AccessType LineParser::access(std::string_view text) const {
    if (text == "r") return AccessType::Read;
    if (text == "w") return AccessType::Write;
    fail("access must be 'r' or 'w'");
}

void LineParser::expect_args(const std::vector<std::string_view>& words, std::size_t n) const {
    if (words.size() < n) {
        fail("'" + std::string(words[0]) + "' needs " + std::to_string(n - 1) + " arguments");
    }
}

std::map<std::string_view, std::string_view> LineParser::options(
    const std::vector<std::string_view>& words, std::size_t first,
    std::initializer_list<std::string_view> allowed) const {
    std::map<std::string_view, std::string_view> out;
    for (std::size_t i = first; i < words.size(); ++i) {
        const auto eq = words[i].find('=');
        if (eq == std::string_view::npos) {
            fail("expected key=value, got '" + std::string(words[i]) + "'");
        }
        const auto key = words[i].substr(0, eq);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail("unknown option '" + std::string(key) + "'");
        }
        if (!out.emplace(key, words[i].substr(eq + 1)).second) {
            fail("option '" + std::string(key) + "' given twice");
        }
    }
    return out;
}

const ThreadDecl& LineParser::declared(Tid t) const {
    if (const auto* decl = out_.find_thread(t)) return *decl;
    semantic("thread " + std::to_string(raw(t)) + " is not declared");
}

void LineParser::require_asid(Asid a) const {
    for (const auto& t : out_.threads) {
        if (t.asid == a) return;
    }
    semantic("address space " + std::to_string(raw(a)) + " is not declared");
}

void LineParser::require_role(Tid t, Role role, std::string_view what) const {
    if (declared(t).role != role) {
        semantic("thread " + std::to_string(raw(t)) + " is not a " + std::string(what));
    }
}

void LineParser::layout(const std::vector<std::string_view>& w) {
    if (seen_directive_) fail("'layout' must come before any other directive");
    auto opts = options(w, 1, {"base", "region_size", "regions", "pages"});
    LayoutConfig cfg;
    if (opts.contains("base")) cfg.user_base = number(opts["base"]);
    if (opts.contains("regions")) cfg.region_count = static_cast<std::uint32_t>(number(opts["regions"]));
    if (opts.contains("pages")) {
        cfg.pages_per_region = static_cast<std::uint32_t>(number(opts["pages"]));
        if (!opts.contains("region_size")) cfg.region_size = cfg.pages_per_region * kPageSize;
    }
    if (opts.contains("region_size")) {
        cfg.region_size = number(opts["region_size"]);
        if (!opts.contains("pages")) {
            cfg.pages_per_region = static_cast<std::uint32_t>(cfg.region_size / kPageSize);
        }
    }
    try {
        cfg.validate();
    } catch (const SimError& e) {
        fail(e.what());
    }
    out_.layout = cfg;
}

void LineParser::thread(const std::vector<std::string_view>& w) {
    expect_args(w, 2);
    ThreadDecl decl;
    decl.tid = tid(w[1]);
    auto opts = options(w, 2, {"asid", "role", "pager"});
    if (!opts.contains("asid")) fail("thread needs asid=");
    decl.asid = asid(opts["asid"]);
    const auto role = opts.contains("role") ? opts["role"] : std::string_view("applicant");
    if (role == "applicant") decl.role = Role::Applicant;
    else if (role == "pager") decl.role = Role::Pager;
    else if (role == "region-mapper") decl.role = Role::RegionMapper;
    else fail("unknown role '" + std::string(role) + "'");
    if (opts.contains("pager")) {
        decl.pager = tid(opts["pager"]);
        require_role(*decl.pager, Role::Pager, "pager");
    }
    if (out_.find_thread(decl.tid)) semantic("thread " + std::string(w[1]) + " declared twice");
    if (decl.role == Role::RegionMapper) {
        for (const auto& t : out_.threads) {
            if (t.role == Role::RegionMapper && t.asid == decl.asid) {
                semantic("address space already has a region mapper");
            }
        }
    }
    out_.threads.push_back(decl);
}

void LineParser::pager(const std::vector<std::string_view>& w) {
    expect_args(w, 2);
    PagerDecl decl;
    decl.tid = tid(w[1]);
    const auto& t = declared(decl.tid);
    if (t.role != Role::Pager && t.role != Role::RegionMapper) {
        semantic("thread " + std::string(w[1]) + " is not a pager");
    }
    if (out_.find_pager(decl.tid)) semantic("pager " + std::string(w[1]) + " declared twice");
    auto opts = options(w, 2, {"policy", "revoke_after", "marker"});
    const auto policy = opts.contains("policy") ? opts["policy"] : std::string_view("zero-fill");
    if (policy == "zero-fill") decl.behavior.policy = PagerPolicy::AnonymousZeroFill;
    else if (policy == "fixed") decl.behavior.policy = PagerPolicy::FixedBacking;
    else if (policy == "rejecting") decl.behavior.policy = PagerPolicy::Rejecting;
    else if (policy == "reflecting") decl.behavior.policy = PagerPolicy::Reflecting;
    else fail("unknown policy '" + std::string(policy) + "'");
    if ((decl.behavior.policy == PagerPolicy::Reflecting) != (t.role == Role::RegionMapper)) {
        semantic("only region mappers reflect, and they only reflect");
    }
    if (opts.contains("revoke_after")) {
        const auto n = number(opts["revoke_after"]);
        if (n == 0 || n > 0xffffffffu) fail("revoke_after must be positive");
        decl.behavior.revoke_after = static_cast<std::uint32_t>(n);
    }
    if (opts.contains("marker")) {
        const auto m = opts["marker"];
        if (m == "zero") {
            decl.behavior.marker.kind = MarkerRule::Kind::Zero;
        } else if (m == "page") {
            decl.behavior.marker.kind = MarkerRule::Kind::PageNumber;
        } else if (m.starts_with("const:")) {
            const auto v = number(m.substr(6));
            if (v >= kMarkerLimit) fail("marker does not fit in 31 bits");
            decl.behavior.marker = {MarkerRule::Kind::Constant, static_cast<Marker>(v)};
        } else {
            fail("unknown marker rule '" + std::string(m) + "'");
        }
    }
    out_.pagers.push_back(decl);
}

void LineParser::backing(const std::vector<std::string_view>& w) {
    expect_args(w, 4);
    if (w.size() > 4) fail("too many arguments");
    const Tid p = tid(w[1]);
    auto it = std::find_if(out_.pagers.begin(), out_.pagers.end(),
                           [p](const PagerDecl& d) { return d.tid == p; });
    if (it == out_.pagers.end() || it->behavior.policy != PagerPolicy::FixedBacking) {
        semantic("backing needs a preceding 'pager " + std::string(w[1]) + " policy=fixed'");
    }
    const Vaddr page = address(w[2]);
    if (page % kPageSize != 0) fail("backing address must be page aligned");
    const Frame frame = number(w[3]);
    if (!backing_frames_.insert(frame).second) {
        semantic("frame " + std::to_string(frame) + " backs two pages");
    }
    if (!it->behavior.backing.emplace(page, frame).second) {
        semantic("page " + std::string(w[2]) + " backed twice");
    }
}

void LineParser::assign(const std::vector<std::string_view>& w) {
    expect_args(w, 4);
    if (w.size() > 4) fail("too many arguments");
    Step s;
    s.kind = StepKind::Assign;
    s.asid = asid(w[1]);
    s.rid = static_cast<Rid>(number(w[2]));
    s.tid = tid(w[3]);
    require_asid(s.asid);
    require_role(s.tid, Role::Pager, "pager");
    if (s.rid >= out_.effective_layout().region_count) semantic("region out of range");
    out_.script.push_back(s);
}

void LineParser::refuse(const std::vector<std::string_view>& w) {
    expect_args(w, 4);
    if (w.size() > 4) fail("too many arguments");
    RefusalDecl r{asid(w[1]), static_cast<Rid>(number(w[2])), tid(w[3])};
    require_asid(r.asid);
    require_role(r.pager, Role::Pager, "pager");
    if (r.rid >= out_.effective_layout().region_count) semantic("region out of range");
    out_.refusals.push_back(r);
}

void LineParser::dbrange(const std::vector<std::string_view>& w) {
    expect_args(w, 5);
    if (w.size() > 5) fail("too many arguments");
    DbRangeDecl d{asid(w[1]), number(w[2]), number(w[3]), tid(w[4])};
    if (d.end > kAddressLimit) fail("range end outside the 32-bit address space");
    if (d.start >= d.end) fail("empty range");
    require_asid(d.asid);
    require_role(d.target, Role::Pager, "pager");
    for (const auto& other : out_.db_ranges) {
        if (other.asid == d.asid && other.start < d.end && d.start < other.end) {
            semantic("overlapping database ranges");
        }
    }
    out_.db_ranges.push_back(d);
}

void LineParser::memory_step(StepKind kind, const std::vector<std::string_view>& w) {
    expect_args(w, 4);
    if (w.size() > 4) fail("too many arguments");
    Step s;
    s.kind = kind;
    s.tid = tid(w[1]);
    s.vaddr = address(w[2]);
    s.access = access(w[3]);
    const auto& t = declared(s.tid);
    if (t.role == Role::Pager) semantic("pagers do not run scripted accesses");
    s.asid = t.asid;
    out_.script.push_back(s);
}

void LineParser::dispatch(const std::vector<std::string_view>& w) {
    expect_args(w, 2);
    if (w.size() > 2) fail("too many arguments");
    Step s;
    s.kind = StepKind::Dispatch;
    s.tid = tid(w[1]);
    s.asid = declared(s.tid).asid;
    out_.script.push_back(s);
}

void LineParser::unmap(const std::vector<std::string_view>& w) {
    expect_args(w, 4);
    if (w.size() > 5) fail("too many arguments");
    Step s;
    s.kind = StepKind::Unmap;
    s.tid = tid(w[1]);
    s.asid = asid(w[2]);
    s.vaddr = address(w[3]);
    if (w.size() == 5) {
        if (w[4] != "revoke") fail("expected 'revoke'");
        s.revoke = true;
    }
    require_role(s.tid, Role::Pager, "pager");
    require_asid(s.asid);
    out_.script.push_back(s);
}

void LineParser::expect(const std::vector<std::string_view>& w) {
    auto opts = options(w, 1, {"fault", "scheme", "verdict", "mode", "ctx", "ipc", "invocations"});
    if (!opts.contains("fault")) fail("expect needs fault=");
    Expectation e;
    e.fault = number(opts["fault"]);
    if (opts.contains("scheme")) {
        e.scheme = parse_scheme(opts["scheme"]);
        if (!e.scheme) fail("unknown scheme '" + std::string(opts["scheme"]) + "'");
    }
    if (opts.contains("verdict")) {
        VerdictCode v;
        if (!parse_verdict_code(opts["verdict"], v)) {
            fail("unknown verdict '" + std::string(opts["verdict"]) + "'");
        }
        e.verdict = v;
    }
    auto count = [&](std::string_view key, std::optional<std::uint32_t>& field) {
        if (opts.contains(key)) field = static_cast<std::uint32_t>(number(opts[key]));
    };
    count("mode", e.mode_switches);
    count("ctx", e.context_switches);
    count("ipc", e.ipc_messages);
    count("invocations", e.pager_invocations);
    out_.expectations.push_back(e);
}

void LineParser::parse_line(std::size_t lineno, std::string_view line) {
    line_ = lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto w = split_words(line);
    if (w.empty()) return;
    const auto d = w[0];
    if (d == "layout") layout(w);
    else if (d == "frames") {
        expect_args(w, 2);
        out_.frame_limit = number(w[1]);
    }
    else if (d == "thread") thread(w);
    else if (d == "pager") pager(w);
    else if (d == "backing") backing(w);
    else if (d == "assign") assign(w);
    else if (d == "refuse") refuse(w);
    else if (d == "dbrange") dbrange(w);
    else if (d == "access") memory_step(StepKind::Access, w);
    else if (d == "fault") memory_step(StepKind::Fault, w);
    else if (d == "trap") memory_step(StepKind::Trap, w);
    else if (d == "dispatch") dispatch(w);
    else if (d == "serve") {
        if (w.size() > 1) fail("'serve' takes no arguments");
        out_.script.push_back(Step{StepKind::Serve});
    }
    else if (d == "unmap") unmap(w);
    else if (d == "expect") expect(w);
    else fail("unknown directive '" + std::string(d) + "'");
    seen_directive_ = true;
}

void LineParser::finish() {
    if (out_.threads.empty()) {
        throw SimError(ErrorCode::SemanticError, "no threads declared");
    }
}

std::string num_hex(std::uint64_t v) { return hex32(v); }

}  // namespace

ScenarioFile parse_scenario(std::string_view text) {
    ScenarioFile out;
    LineParser parser(out);
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        parser.parse_line(++lineno, text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    parser.finish();
    return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SimError(ErrorCode::Io, "cannot open scenario " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const ScenarioFile& s) {
    std::ostringstream out;
    if (s.layout) {
        out << "layout base=" << num_hex(s.layout->user_base)
            << " region_size=" << num_hex(s.layout->region_size)
            << " regions=" << s.layout->region_count << " pages=" << s.layout->pages_per_region
            << '\n';
    }
    if (s.frame_limit) out << "frames " << *s.frame_limit << '\n';
    for (const auto& t : s.threads) {
        out << "thread " << raw(t.tid) << " asid=" << raw(t.asid) << " role=" << to_string(t.role);
        if (t.pager) out << " pager=" << raw(*t.pager);
        out << '\n';
    }
    for (const auto& p : s.pagers) {
        const auto& b = p.behavior;
        out << "pager " << raw(p.tid) << " policy=" << to_string(b.policy);
        if (b.revoke_after) out << " revoke_after=" << *b.revoke_after;
        switch (b.marker.kind) {
            case MarkerRule::Kind::Zero: out << " marker=zero"; break;
            case MarkerRule::Kind::PageNumber: out << " marker=page"; break;
            case MarkerRule::Kind::Constant: out << " marker=const:" << b.marker.value; break;
        }
        out << '\n';
        for (const auto& [page, frame] : b.backing) {
            out << "backing " << raw(p.tid) << ' ' << num_hex(page) << ' ' << frame << '\n';
        }
    }
    for (const auto& r : s.refusals) {
        out << "refuse " << raw(r.asid) << ' ' << r.rid << ' ' << raw(r.pager) << '\n';
    }
    for (const auto& d : s.db_ranges) {
        out << "dbrange " << raw(d.asid) << ' ' << num_hex(d.start) << ' ' << num_hex(d.end) << ' '
            << raw(d.target) << '\n';
    }
    for (const auto& st : s.script) {
        auto mem = [&](std::string_view name) {
            out << name << ' ' << raw(st.tid) << ' ' << num_hex(st.vaddr) << ' '
                << (st.access == AccessType::Read ? 'r' : 'w') << '\n';
        };
        switch (st.kind) {
            case StepKind::Assign:
                out << "assign " << raw(st.asid) << ' ' << st.rid << ' ' << raw(st.tid) << '\n';
                break;
            case StepKind::Access: mem("access"); break;
            case StepKind::Fault: mem("fault"); break;
            case StepKind::Trap: mem("trap"); break;
            case StepKind::Dispatch: out << "dispatch " << raw(st.tid) << '\n'; break;
            case StepKind::Serve: out << "serve\n"; break;
            case StepKind::Unmap:
                out << "unmap " << raw(st.tid) << ' ' << raw(st.asid) << ' ' << num_hex(st.vaddr)
                    << (st.revoke ? " revoke" : "") << '\n';
                break;
        }
    }
    for (const auto& e : s.expectations) {
        out << "expect fault=" << e.fault;
        if (e.scheme) out << " scheme=" << to_string(*e.scheme);
        if (e.verdict) out << " verdict=" << to_string(*e.verdict);
        if (e.mode_switches) out << " mode=" << *e.mode_switches;
        if (e.context_switches) out << " ctx=" << *e.context_switches;
        if (e.ipc_messages) out << " ipc=" << *e.ipc_messages;
        if (e.pager_invocations) out << " invocations=" << *e.pager_invocations;
        out << '\n';
    }
    return out.str();
}

}  // namespace mpsim
