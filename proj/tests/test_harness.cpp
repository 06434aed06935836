#include <doctest.h>

#include <fstream>
#include <sstream>

#include "repsim/checker.hpp"
#include "repsim/runner.hpp"

using namespace repsim;

namespace {

std::string scenario_dir() { return std::string(REPSIM_SOURCE_DIR) + "/scenarios/"; }

std::string patch(std::string text, const std::string& from, const std::string& to) {
    auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("the bundled semi-entry fixture loads: 4x3 region, one write at 42") {
    Scenario s = load_scenario(scenario_dir() + "semi_entry_write.json");
    CHECK(s.branches == 4);
    CHECK(s.semis_per_branch == 3);
    REQUIRE(s.ops.size() == 1);
    CHECK(s.ops[0].server == "42");
    CHECK(s.ops[0].is_write);
    CHECK(s.faults.empty());
}

TEST_CASE("load errors carry the offending entry") {
    const std::string good = read_file(scenario_dir() + "semi_entry_write.json");

    CHECK_THROWS_AS(parse_scenario(patch(good, "\"server\": \"42\"",
                                         "\"server\": \"99\"")),
                    LoadError);
    CHECK_THROWS_AS(parse_scenario(patch(good, "\"session_timeout_ms\": 200",
                                         "\"session_timeout_ms\": 40")),
                    LoadError);
    CHECK_THROWS_AS(parse_scenario(patch(good, "\"op\": \"write\"",
                                         "\"op\": \"upsert\"")),
                    LoadError);
    CHECK_THROWS_AS(parse_scenario("{nonsense"), LoadError);
    CHECK_THROWS_AS(parse_scenario(patch(good, "\"priorities\": [1, 2, 3, 4]",
                                         "\"priorities\": [1, 1, 3, 4]")),
                    LoadError);

    try {
        parse_scenario(patch(good, "\"server\": \"42\"", "\"server\": \"99\""));
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("ops[0]") != std::string::npos);
    }
}

TEST_CASE("duplicate op ids and inconsistent faults are load errors") {
    Scenario s;
    s.ops.push_back(ScenarioOp{10, "c1", "42", true, "w1", "k", "v"});
    s.ops.push_back(ScenarioOp{20, "c1", "43", true, "w1", "k", "v"});
    CHECK_THROWS_AS(validate_scenario(s), LoadError);

    Scenario f;
    f.faults.push_back(ScenarioFault{10, true, "41"});
    f.faults.push_back(ScenarioFault{20, true, "41"});  // crash of crashed
    CHECK_THROWS_AS(validate_scenario(f), LoadError);

    Scenario r;
    r.faults.push_back(ScenarioFault{10, false, "41"});  // recover of up server
    CHECK_THROWS_AS(validate_scenario(r), LoadError);
}

TEST_CASE("ops are normalized to time order at load") {
    Scenario s;
    s.ops.push_back(ScenarioOp{300, "c1", "42", true, "", "a", "1"});
    s.ops.push_back(ScenarioOp{100, "c1", "43", true, "", "b", "2"});
    validate_scenario(s);
    CHECK(s.ops[0].at == 100);
    CHECK(s.ops[0].id == "w2");  // ids assigned before sorting, in file order
    CHECK(s.ops[1].id == "w1");
}

TEST_CASE("commit latency follows the hop arithmetic exactly") {
    RunResult semi = run_scenario(load_scenario(scenario_dir() + "semi_entry_write.json"));
    Metrics ms = semi.metrics();
    REQUIRE(ms.writes.size() == 1);
    CHECK(ms.writes[0].latency() == 50);  // 2c + 4L

    RunResult prim =
        run_scenario(load_scenario(scenario_dir() + "primary_entry_write.json"));
    Metrics mp = prim.metrics();
    REQUIRE(mp.writes.size() == 1);
    CHECK(mp.writes[0].latency() == 30);  // 2c + 2L
}

TEST_CASE("zero ops produce empty metrics and an empty protocol trace") {
    Scenario s;
    RunResult r = run_scenario(s);
    CHECK(r.world->trace().empty());
    Metrics m = r.metrics();
    CHECK(m.writes.empty());
    CHECK(m.reads.empty());
    for (const auto& [code, c] : m.servers) {
        CHECK(c.applied == 0);
        CHECK(c.reads == 0);
    }
}

TEST_CASE("convergence passes on a fault-free run and catches corruption") {
    Scenario s = load_scenario(scenario_dir() + "semi_entry_write.json");
    RunResult r = run_scenario(s);
    CHECK(check_convergence(*r.world).pass);

    r.world->replica(parse_server_id("33")).mutable_state().store["alpha"] = "junk";
    ConvergenceReport bad = check_convergence(*r.world);
    CHECK(!bad.pass);
    CHECK(bad.detail.find("33") != std::string::npos);
    CHECK(bad.detail.find("alpha") != std::string::npos);
}

TEST_CASE("convergence also flags non-empty pending tables") {
    Scenario s = load_scenario(scenario_dir() + "semi_entry_write.json");
    RunResult r = run_scenario(s);
    TransactionRecord rec;
    rec.request = WriteRequest{"zombie", "c9", "x", "y", parse_server_id("24")};
    r.world->replica(parse_server_id("24")).mutable_state().pending["zombie"] = rec;
    ConvergenceReport bad = check_convergence(*r.world);
    CHECK(!bad.pass);
    CHECK(bad.detail.find("24") != std::string::npos);
    CHECK(bad.detail.find("zombie") != std::string::npos);
}

TEST_CASE("verify_trace passes a healthy run and flags a forged line") {
    Scenario s = load_scenario(scenario_dir() + "semi_entry_write.json");
    RunResult r = run_scenario(s);
    std::string text = r.trace_text();
    TraceReport ok = verify_trace(parse_trace(text));
    CHECK(ok.pass());
    CHECK(ok.checks.size() == 6);

    // forge a backward transition on a protocol send
    std::string forged = patch(
        text, "status=acknowledgement from semi synchronous replication Level",
        "status=pending from Secondary in synchronous replication level");
    TraceReport bad = verify_trace(parse_trace(forged));
    CHECK(!bad.pass());
    bool found = false;
    for (const auto& v : bad.violations) found |= v.check == "status-transitions";
    CHECK(found);
}

TEST_CASE("the failover golden passes every check, single-primary included") {
    ParsedTrace t = parse_trace(
        read_file(std::string(REPSIM_SOURCE_DIR) + "/tests/golden/failover_primary.trace"));
    TraceReport report = verify_trace(t);
    CHECK(report.pass());
    bool single_primary_ran = false;
    for (const auto& [name, ok] : report.checks)
        if (name == "single-primary") {
            single_primary_ran = true;
            CHECK(ok);
        }
    CHECK(single_primary_ran);
}

TEST_CASE("trace text is stable across repeated runs") {
    Scenario s = load_scenario(scenario_dir() + "failover_sync.json");
    RunResult a = run_scenario(s);
    RunResult b = run_scenario(s);
    CHECK(a.trace_text() == b.trace_text());
    CHECK(a.metrics_json() == b.metrics_json());
}

TEST_CASE("trace round-trip: render then parse preserves the records") {
    Scenario s = load_scenario(scenario_dir() + "semi_entry_write.json");
    RunResult r = run_scenario(s);
    ParsedTrace t = parse_trace(r.trace_text());
    REQUIRE(t.records.size() == r.world->trace().size());
    CHECK(t.branches == 4);
    CHECK(t.semis == 3);
    CHECK(t.heartbeat_ms == 50);
    CHECK(t.session_timeout_ms == 200);
    CHECK(t.fault_count == 0);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        CHECK(render_trace_record(t.records[i]) ==
              render_trace_record(r.world->trace()[i]));
    }
}

TEST_CASE("malformed traces are parse errors") {
    CHECK_THROWS_AS(parse_trace("not a trace line\n"), ParseError);
    CHECK_THROWS_AS(parse_trace("t=xyz 42 deliver\n"), std::exception);
    CHECK_THROWS_AS(parse_trace("t=5 42 deliver broken\n"), ParseError);
    // header-only and empty inputs are fine, just empty
    CHECK(parse_trace("# repsim trace v1\n").records.empty());
    CHECK(parse_trace("").records.empty());
}

TEST_CASE("scenario serialization round-trips") {
    Scenario s = load_scenario(scenario_dir() + "failover_primary.json");
    Scenario again = parse_scenario(scenario_to_json(s));
    CHECK(again.ops.size() == s.ops.size());
    CHECK(again.faults.size() == s.faults.size());
    CHECK(again.seed == s.seed);
    CHECK(scenario_to_json(again) == scenario_to_json(s));
}

TEST_CASE("a recovered ex-primary rejoins as a sync secondary, ranked last") {
    Scenario s;
    s.max_time_ms = 10000;
    s.ops.push_back(ScenarioOp{300, "c1", "42", true, "w1", "a", "1"});
    s.ops.push_back(ScenarioOp{3000, "c1", "13", true, "w2", "b", "2"});
    s.ops.push_back(ScenarioOp{4000, "c1", "01", true, "w3", "c", "3"});
    s.faults.push_back(ScenarioFault{1000, true, "01"});
    s.faults.push_back(ScenarioFault{2000, false, "01"});
    validate_scenario(s);

    RunResult r = run_scenario(s);
    REQUIRE(r.reason == RunReason::Quiescent);
    const Replica& old_primary = r.world->replica(parse_server_id("01"));
    CHECK(old_primary.role() == Role::SyncSecondary);
    CHECK(old_primary.state().epoch == 1);
    CHECK(old_primary.state().known_primary.code() == "11");
    CHECK(old_primary.effective_rank(parse_server_id("01")) == 5);
    CHECK(check_convergence(*r.world).pass);

    Metrics m = r.metrics();
    // w3 was addressed to the deposed 01, now a plain sync secondary
    const WriteMetric* w3 = m.write("w3");
    REQUIRE(w3);
    CHECK(w3->acked_at >= 0);
    CHECK(w3->epoch == 1);

    // a write entering at the new primary's own child absorbs the sync hop
    // in place; the trace shows the intermediate step and still verifies
    bool relayed = false;
    for (const auto& rec : r.world->trace())
        if (rec.tag == "relay" && rec.endpoint == "11") relayed = true;
    CHECK(relayed);
    CHECK(verify_trace(parse_trace(r.trace_text())).pass());
}

TEST_CASE("randomized fault schedules keep every trace invariant (property)") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        std::mt19937 gen(seed * 131);
        const std::vector<std::string> servers = {
            "01", "11", "12", "13", "14", "21", "22", "23", "24",
            "31", "32", "33", "34", "41", "42", "43", "44"};
        Scenario s;
        s.jitter_ms = 3;
        s.seed = seed;
        s.client_retry_ms = 700;
        s.max_time_ms = 60000;
        for (int i = 0; i < 30; ++i)
            s.ops.push_back(ScenarioOp{100 + i * 40, "c" + std::to_string(i % 4 + 1),
                                       servers[gen() % servers.size()], true,
                                       "w" + std::to_string(i + 1),
                                       "k" + std::to_string(i % 9),
                                       "v" + std::to_string(i)});
        s.ops.push_back(ScenarioOp{2400, "c1", "33", false, "r1", "k0", ""});
        // a sync dies mid-run, then the primary; both recover later
        s.faults.push_back(ScenarioFault{400, true, "41"});
        s.faults.push_back(ScenarioFault{900, true, "01"});
        s.faults.push_back(ScenarioFault{1600, false, "41"});
        s.faults.push_back(ScenarioFault{1900, false, "01"});
        validate_scenario(s);

        RunResult r = run_scenario(s);
        INFO("seed ", seed);
        CHECK(r.reason == RunReason::Quiescent);
        CHECK(check_convergence(*r.world).pass);
        TraceReport report = verify_trace(parse_trace(r.trace_text()));
        for (const auto& v : report.violations)
            MESSAGE("seed ", seed, " [", v.check, "] line ", v.line, ": ", v.detail);
        CHECK(report.pass());
        for (const auto& w : r.metrics().writes) CHECK(w.acked_at >= 0);
    }
}

TEST_CASE("read metrics carry the replied value") {
    Scenario s = load_scenario(scenario_dir() + "failover_semi.json");
    RunResult r = run_scenario(s);
    Metrics m = r.metrics();
    REQUIRE(m.reads.size() == 2);
    CHECK(m.reads[0].found);
    CHECK(m.reads[0].value == "1");
    for (const auto& rd : m.reads) CHECK(rd.replied_at >= 0);
}
