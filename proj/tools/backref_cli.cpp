// backref: run BackRef simulations, export evidence, trace streams, benchmark.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "backref/scenario.hpp"
#include "backref/tracer.hpp"

namespace fs = std::filesystem;
using namespace backref;

namespace {

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, ByteSpan data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  return bool(out);
}

bool write_file(const fs::path& path, const std::string& data) {
  return write_file(path, to_bytes(data));
}

int write_exports(Simnet& sim, const Scenario& scenario, const fs::path& out_dir,
                  uint32_t coarsen_ts) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  for (const auto& n : scenario.nodes) {
    const LogStore& log = sim.node(to_bytes(n.id)).log();
    if (!write_file(out_dir / (n.id + ".bkrflog"), log.export_log(coarsen_ts))) return 1;
    if (!write_file(out_dir / (n.id + ".bkrflog.txt"), log.export_text())) return 1;
  }
  if (!write_file(out_dir / "isp.bkrfisp", sim.isp().export_registry())) return 1;
  if (!write_file(out_dir / "roster.txt", export_roster(sim.directory()))) return 1;
  if (!write_file(out_dir / "destinations.log", export_destination_logs(sim))) return 1;
  return 0;
}

int cmd_run(const std::string& scenario_path, std::optional<uint64_t> seed,
            const std::string& out_dir, bool export_logs, uint32_t coarsen_ts, bool quiet) {
  auto text = read_file(scenario_path);
  if (!text) {
    std::cerr << "error: cannot read scenario " << scenario_path << "\n";
    return 1;
  }
  auto loaded = load_scenario(*text);
  if (std::holds_alternative<ScenarioError>(loaded)) {
    std::cerr << "error: " << scenario_path << ": " << std::get<ScenarioError>(loaded).message
              << "\n";
    return 1;
  }
  const Scenario& scenario = std::get<Scenario>(loaded);
  ScenarioRun run = run_scenario(scenario, seed);
  if (!quiet) std::cout << run.summary.to_text();
  if (export_logs) {
    int rc = write_exports(*run.sim, scenario, out_dir, coarsen_ts);
    if (rc) {
      std::cerr << "error: failed writing exports to " << out_dir << "\n";
      return rc;
    }
    if (!write_file(fs::path(out_dir) / "summary.txt", run.summary.to_text())) return 1;
  }
  return 0;
}

int cmd_trace(const std::string& exit_node, const std::string& address, uint16_t port,
              uint32_t ts, uint32_t tolerance, const std::vector<std::string>& log_paths,
              const std::string& isp_path, const std::string& roster_path,
              const std::string& report_path) {
  LogSnapshots snapshots;
  for (const auto& path : log_paths) {
    auto data = read_file(path);
    if (!data) {
      std::cerr << "error: cannot read log export " << path << "\n";
      return 1;
    }
    auto store = LogStore::import_log(to_bytes(*data));
    if (!store) {
      std::cerr << "error: not a BKRFLOG1 export: " << path << "\n";
      return 1;
    }
    Bytes node_id = store->node_id();
    snapshots.emplace(node_id, std::move(*store));
  }
  IspRegistry isp;
  if (!isp_path.empty()) {
    auto data = read_file(isp_path);
    if (!data) {
      std::cerr << "error: cannot read ISP export " << isp_path << "\n";
      return 1;
    }
    auto reg = IspRegistry::import_registry(to_bytes(*data));
    if (!reg) {
      std::cerr << "error: not a BKRFISP1 export: " << isp_path << "\n";
      return 1;
    }
    isp = std::move(*reg);
  }
  std::vector<NodeInfo> roster;
  if (!roster_path.empty()) {
    auto data = read_file(roster_path);
    if (!data) {
      std::cerr << "error: cannot read roster " << roster_path << "\n";
      return 1;
    }
    roster = import_roster(*data);
  }

  TraceQuery query;
  query.exit_node = to_bytes(exit_node);
  query.descriptor = StreamRequest{to_bytes(address), port, ts};
  query.ts_tolerance = tolerance;
  TraceReport report = full_trace(query, snapshots, isp, roster);
  std::string text = report.serialize();
  if (!report_path.empty() && !write_file(report_path, text)) {
    std::cerr << "error: cannot write report " << report_path << "\n";
    return 1;
  }
  std::cout << text;
  if (report.outcome.user_identified) return 0;
  return report.outcome.reason == TraceFailReason::kNonCooperating ? 3 : 2;
}

int cmd_bench(uint32_t iterations) {
  using clock = std::chrono::steady_clock;
  BlsKeyPair kp = bls_keygen(to_bytes("bench-key"));
  Drbg rng(uint64_t(0xbe7c4));
  double sign_total = 0, verify_total = 0;
  double sign_min = 1e18, sign_max = 0, verify_min = 1e18, verify_max = 0;
  uint32_t failures = 0;
  for (uint32_t i = 0; i < iterations; ++i) {
    Bytes msg = rng.next_bytes(64);
    auto t0 = clock::now();
    BlsSignature sig = bls_sign(kp.sk, msg);
    auto t1 = clock::now();
    bool ok = bls_verify(kp.pk, msg, sig);
    auto t2 = clock::now();
    if (!ok) ++failures;
    double sign_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    double verify_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    sign_total += sign_ms;
    verify_total += verify_ms;
    sign_min = std::min(sign_min, sign_ms);
    sign_max = std::max(sign_max, sign_ms);
    verify_min = std::min(verify_min, verify_ms);
    verify_max = std::max(verify_max, verify_ms);
  }
  double sign_mean = sign_total / iterations;
  double verify_mean = verify_total / iterations;
  std::cout << "iterations: " << iterations << "\n";
  std::cout << "sign.mean_ms: " << sign_mean << "\n";
  std::cout << "sign.min_ms: " << sign_min << "\n";
  std::cout << "sign.max_ms: " << sign_max << "\n";
  std::cout << "verify.mean_ms: " << verify_mean << "\n";
  std::cout << "verify.min_ms: " << verify_min << "\n";
  std::cout << "verify.max_ms: " << verify_max << "\n";
  std::cout << "verify.failures: " << failures << "\n";
  // per-cell BackRef overhead: one signature plus one 4-byte timestamp
  std::cout << "overhead.bytes: " << (GroupSuite::kG1Bytes + 4) << "\n";
  std::cout << "overhead.bytes.paper_256bit_group: " << (32 + 4) << "\n";
  std::cout << "signature.bytes: " << GroupSuite::kG1Bytes << "\n";
  std::cout << "pseudonym.bytes: " << GroupSuite::kG2Bytes << "\n";
  // timing note, not a hard assertion: pairing-heavy verification usually
  // dominates signing
  std::cout << "note: verify/sign ratio " << (verify_mean / std::max(sign_mean, 1e-9)) << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BackRef accountability layer for onion routing"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out";
  std::optional<uint64_t> seed;
  bool export_logs = false;
  uint32_t coarsen_ts = 0;

  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  uint64_t seed_value = 0;
  bool seed_set = false;
  run->add_option("--seed", seed_value, "override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--out", out_dir, "output directory for exports");
  run->add_flag("--export-logs", export_logs, "write BKRFLOG1/ISP/roster/destination exports");
  run->add_option("--coarsen-ts", coarsen_ts,
                  "round stored_ts metadata down to this many seconds in exports");

  auto* exp = app.add_subcommand("export-logs", "run a scenario and write only the exports");
  std::string exp_scenario, exp_out = "out";
  uint64_t exp_seed_value = 0;
  bool exp_seed_set = false;
  uint32_t exp_coarsen = 0;
  exp->add_option("--scenario", exp_scenario, "scenario JSON file")->required();
  exp->add_option("--seed", exp_seed_value, "override the scenario seed")
      ->each([&](const std::string&) { exp_seed_set = true; });
  exp->add_option("--out", exp_out, "output directory");
  exp->add_option("--coarsen-ts", exp_coarsen, "stored_ts export granularity");

  auto* trace = app.add_subcommand("trace", "verify backward traceability for a stream");
  std::string exit_node, address, isp_path, roster_path, report_path = "trace-report.txt";
  uint16_t port = 0;
  uint32_t ts = 0, tolerance = 0;
  std::vector<std::string> log_paths;
  trace->add_option("--exit", exit_node, "exit node id the stream left from")->required();
  trace->add_option("--address", address, "destination address from the server log")->required();
  trace->add_option("--port", port, "destination port")->required();
  trace->add_option("--ts", ts, "stream timestamp (ts_xm) from the server log")->required();
  trace->add_option("--ts-tolerance", tolerance, "widen timestamp matching to ±N seconds");
  trace->add_option("--logs", log_paths, "BKRFLOG1 export files")->required()->expected(-1);
  trace->add_option("--isp", isp_path, "BKRFISP1 registry export");
  trace->add_option("--roster", roster_path, "roster export from run");
  trace->add_option("--out", report_path, "trace report output file");

  auto* bench = app.add_subcommand("bench", "measure sign/verify cost and per-cell overhead");
  uint32_t iterations = 1000;
  bench->add_option("--iterations", iterations, "number of sign+verify iterations")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(scenario_path, seed_set ? std::optional(seed_value) : std::nullopt, out_dir,
                   export_logs, coarsen_ts, false);
  if (exp->parsed())
    return cmd_run(exp_scenario, exp_seed_set ? std::optional(exp_seed_value) : std::nullopt,
                   exp_out, true, exp_coarsen, true);
  if (trace->parsed())
    return cmd_trace(exit_node, address, port, ts, tolerance, log_paths, isp_path, roster_path,
                     report_path);
  if (bench->parsed()) return cmd_bench(iterations);
  return 1;
}
