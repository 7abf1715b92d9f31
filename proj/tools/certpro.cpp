#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "certpro/capture.hpp"
#include "certpro/certify.hpp"
#include "certpro/digest.hpp"
#include "certpro/errors.hpp"
#include "certpro/graph.hpp"
#include "certpro/interchange.hpp"
#include "certpro/replay.hpp"
#include "certpro/repo.hpp"
#include "certpro/store.hpp"
#include "certpro/timeutil.hpp"

namespace {

using namespace certpro;

struct Cli {
  bool json = false;
  std::string root;

  fs::path repo_root() const { return root.empty() ? Repo::default_root() : fs::path(root); }
};

std::pair<std::string, std::string> split_kv(const std::string& s, const char* what) {
  auto pos = s.find('=');
  if (pos == std::string::npos || pos == 0)
    fail(Errc::Format, std::string(what) + " must be key=value: '" + s + "'");
  return {s.substr(0, pos), s.substr(pos + 1)};
}

void emit(const Cli& cli, const Json& machine, const std::string& human) {
  if (cli.json)
    std::cout << machine.dump() << "\n";
  else
    std::cout << human << "\n";
}

int run_cli(int argc, char** argv) {
  CLI::App app{"certpro - provenance ledger and reproducibility certification"};
  app.require_subcommand(1);
  Cli cli;
  app.add_flag("--json", cli.json, "structured output on stdout");
  app.add_option("--root", cli.root, "repository root (default: $CERTPRO_ROOT or ./.certpro)");

  // init
  auto* init = app.add_subcommand("init", "create a repository");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "bring a raw file under provenance control");
  std::string ingest_path, ingest_format, ingest_modality;
  std::vector<std::string> subject_kvs, label_kvs;
  ingest->add_option("path", ingest_path, "file to ingest")->required();
  ingest->add_option("--format", ingest_format, "data format tag (e.g. CSV, H5)");
  ingest->add_option("--modality", ingest_modality, "data modality");
  ingest->add_option("--subject", subject_kvs,
                     "subject metadata key=value (subject_id, cohort, collection.*, rest are "
                     "demographics)");
  ingest->add_option("--label", label_kvs, "artifact label key=value");

  // run
  auto* run = app.add_subcommand("run", "execute a step under capture");
  run->allow_extras();
  std::string run_type, run_deps, run_agent;
  std::vector<std::string> run_ins, run_outs;
  std::vector<std::string> config_kvs;
  bool run_nondet = false;
  unsigned run_timeout = 3600;
  run->add_option("--type", run_type, "transformation type tag")->required();
  run->add_option("--in", run_ins, "input as <digest>=<staging name>");
  run->add_option("--out", run_outs, "declared output filename")->required();
  run->add_option("--deps", run_deps, "dependency manifest (name=version lines)");
  run->add_option("--config", config_kvs, "config key=value");
  run->add_option("--agent", run_agent, "agent recorded for the step");
  run->add_option("--timeout", run_timeout, "wall-clock timeout in seconds");
  run->add_flag("--nondeterministic", run_nondet, "mark the step nondeterministic");

  // trace
  auto* trace = app.add_subcommand("trace", "export the ancestry of artifacts");
  std::vector<std::string> trace_roots;
  bool trace_dot = false;
  trace->add_option("digest", trace_roots, "root artifact digests")->required();
  trace->add_flag("--dot", trace_dot, "render DOT instead of the trace document");

  // verify
  auto* verify = app.add_subcommand("verify", "verify stored objects against their digests");
  std::vector<std::string> verify_ids;
  verify->add_option("digest", verify_ids, "artifact digests")->required();

  // certify
  auto* certify = app.add_subcommand("certify", "assess a trace and issue a certificate");
  std::vector<std::string> certify_roots;
  std::string certify_prefix = "10.57785";
  std::string certify_issuer = "certpro";
  certify->add_option("digest", certify_roots, "root artifact digests")->required();
  certify->add_option("--prefix", certify_prefix, "identifier prefix (10.NNNNN)");
  certify->add_option("--issuer", certify_issuer, "issuer recorded on the certificate");

  // verify-cert
  auto* verify_cert = app.add_subcommand("verify-cert", "re-check an issued certificate");
  std::string vc_doi;
  verify_cert->add_option("doi", vc_doi, "certificate identifier")->required();

  // replay
  auto* replay = app.add_subcommand("replay", "re-execute recorded steps and compare outputs");
  std::string replay_pid;
  std::vector<std::string> replay_roots;
  std::string replay_env = "warn";
  unsigned replay_timeout = 3600;
  bool replay_keep = false;
  replay->add_option("process-id", replay_pid, "process to replay");
  replay->add_option("--roots", replay_roots, "replay the whole ancestry of these digests");
  replay->add_option("--env", replay_env, "environment check: strict|warn|skip")
      ->check(CLI::IsMember({"strict", "warn", "skip"}));
  replay->add_option("--timeout", replay_timeout, "per-step timeout in seconds");
  replay->add_flag("--keep-workdirs", replay_keep, "keep replay working directories");

  // export / import
  auto* exp = app.add_subcommand("export", "write the canonical trace document to stdout");
  std::vector<std::string> export_roots;
  std::string export_bundle;
  exp->add_option("digest", export_roots, "root artifact digests")->required();
  exp->add_option("--bundle", export_bundle, "also write object bytes into this directory");

  auto* imp = app.add_subcommand("import", "import a trace document");
  std::string import_doc, import_bundle;
  imp->add_option("doc", import_doc, "trace document file")->required();
  imp->add_option("--bundle", import_bundle, "object bundle directory");

  // report
  auto* report = app.add_subcommand("report", "render the HTML report for a certificate");
  std::string report_doi, report_out;
  report->add_option("doi", report_doi, "certificate identifier")->required();
  report->add_option("--out", report_out, "output HTML file")->required();

  CLI11_PARSE(app, argc, argv);

  if (init->parsed()) {
    Repo repo = Repo::init(cli.repo_root());
    emit(cli, Json{{"root", repo.root().string()}}, "initialized repository at " + repo.root().string());
    return 0;
  }

  Repo repo = Repo::open(cli.repo_root());
  ArtifactStore store(repo);
  Ledger ledger(repo, store);

  if (ingest->parsed()) {
    ArtifactMeta meta;
    meta.data_format = ingest_format;
    meta.modality = ingest_modality;
    for (const auto& kv : label_kvs) {
      auto [k, v] = split_kv(kv, "--label");
      meta.labels[k] = v;
    }
    std::vector<SubjectMetadata> subjects;
    if (!subject_kvs.empty()) {
      SubjectMetadata s;
      for (const auto& kv : subject_kvs) {
        auto [k, v] = split_kv(kv, "--subject");
        if (k == "subject_id")
          s.subject_id = v;
        else if (k == "cohort")
          s.cohort = v;
        else if (k.rfind("collection.", 0) == 0)
          s.collection[k.substr(11)] = v;
        else
          s.demographics[k] = v;
      }
      if (s.subject_id.empty()) s.subject_id = "subject-1";
      subjects.push_back(std::move(s));
    }
    CaptureRunner runner(repo, store, ledger);
    ArtifactId id = runner.ingest_raw(ingest_path, meta, subjects);
    emit(cli, Json{{"id", id.digest}}, id.digest);
    return 0;
  }

  if (run->parsed()) {
    StepSpec spec;
    spec.command = run->remaining();
    spec.transformation_type = run_type;
    spec.nondeterministic = run_nondet;
    spec.agent = run_agent;
    if (!run_deps.empty()) spec.dependency_manifest = fs::path(run_deps);
    for (const auto& kv : run_ins) {
      auto [digest, name] = split_kv(kv, "--in");
      spec.declared_inputs.emplace_back(digest, name);
    }
    spec.declared_outputs = run_outs;
    for (const auto& kv : config_kvs) {
      auto [k, v] = split_kv(kv, "--config");
      spec.config[k] = v;
    }
    CaptureOptions opts;
    opts.timeout = std::chrono::seconds(run_timeout);
    CaptureRunner runner(repo, store, ledger, opts);
    ProcessRecord rec = runner.run_step(spec);
    Json outputs = Json::array();
    for (const auto& o : rec.outputs) outputs.push_back(o);
    emit(cli, Json{{"outputs", outputs}, {"process_id", rec.process_id}}, rec.process_id);
    return 0;
  }

  if (trace->parsed()) {
    if (trace_dot)
      std::cout << render_dot(ledger.ancestry(trace_roots));
    else
      std::cout << export_trace(ledger, store, trace_roots) << "\n";
    return 0;
  }

  if (verify->parsed()) {
    for (const auto& id : verify_ids) {
      VerifyResult r = store.verify(ArtifactId{id});
      const char* name =
          r == VerifyResult::Ok ? "ok" : (r == VerifyResult::Corrupt ? "corrupt" : "missing");
      emit(cli, Json{{"digest", id}, {"result", name}}, id + " " + name);
    }
    return 0;
  }

  if (certify->parsed()) {
    CompletenessReport rep = assess_completeness(ledger, store, certify_roots);
    if (rep.badge == BadgeLevel::Fragment) {
      std::cerr << "trace is FRAGMENT; certificate refused\n";
      for (const auto& f : rep.findings)
        std::cerr << "  [" << f.severity << "] " << f.rule << " " << f.node_id << ": " << f.message
                  << "\n";
      emit(cli, to_json(rep), "FRAGMENT");
      return 1;
    }
    Registrar registrar(repo);
    Doi doi = registrar.mint(certify_prefix);
    Json cert = registrar.issue(rep, doi, certify_issuer);
    emit(cli, cert, doi.render() + " " + badge_name(rep.badge));
    return 0;
  }

  if (verify_cert->parsed()) {
    Registrar registrar(repo);
    Json cert = registrar.load_certificate(vc_doi);
    CertVerifyOutcome outcome = verify_certificate(ledger, store, cert);
    const char* name = outcome == CertVerifyOutcome::Valid
                           ? "valid"
                           : (outcome == CertVerifyOutcome::TraceChanged ? "trace_changed"
                                                                         : "store_corrupt");
    emit(cli, Json{{"doi", vc_doi}, {"outcome", name}}, name);
    return 0;
  }

  if (replay->parsed()) {
    ReplayPolicy policy;
    policy.environment_check = replay_env == "strict"
                                   ? EnvCheck::Strict
                                   : (replay_env == "skip" ? EnvCheck::Skip : EnvCheck::Warn);
    policy.timeout_seconds = replay_timeout;
    policy.keep_workdirs = replay_keep;
    ReplayEngine engine(repo, store, ledger);
    std::vector<ReplayResult> results;
    if (!replay_roots.empty())
      results = engine.replay_subgraph(replay_roots, policy);
    else if (!replay_pid.empty())
      results.push_back(engine.replay_process(replay_pid, policy));
    else
      fail(Errc::Format, "replay needs a process id or --roots");
    for (const auto& r : results)
      emit(cli, to_json(r), r.process_id + " " + replay_status_name(r.status));
    return 0;
  }

  if (exp->parsed()) {
    std::optional<fs::path> bundle;
    if (!export_bundle.empty()) bundle = fs::path(export_bundle);
    std::cout << export_trace(ledger, store, export_roots, bundle) << "\n";
    return 0;
  }

  if (imp->parsed()) {
    std::string bytes = read_file(import_doc);
    while (!bytes.empty() && (bytes.back() == '\n' || bytes.back() == '\r')) bytes.pop_back();
    std::optional<fs::path> bundle;
    if (!import_bundle.empty()) bundle = fs::path(import_bundle);
    TraceGraph g = import_trace(store, ledger, bytes, bundle);
    emit(cli,
         Json{{"artifacts", g.artifacts.size()}, {"processes", g.processes.size()}},
         "imported " + std::to_string(g.artifacts.size()) + " artifacts, " +
             std::to_string(g.processes.size()) + " processes");
    return 0;
  }

  if (report->parsed()) {
    Registrar registrar(repo);
    Json cert = registrar.load_certificate(report_doi);
    std::vector<std::string> roots;
    for (const Json& r : cert.at("roots")) roots.push_back(r.get<std::string>());
    TraceGraph g = ledger.ancestry(roots);
    atomic_write_file(report_out, render_report(cert, g));
    emit(cli, Json{{"out", report_out}}, "wrote " + report_out);
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const certpro::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
