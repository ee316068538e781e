#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "petastore/catalog/bridge.h"
#include "petastore/cdb/conditions_store.h"
#include "petastore/harness/corpus.h"
#include "petastore/harness/report.h"
#include "petastore/harness/simulator.h"
#include "petastore/locks/lock_protocol.h"
#include "petastore/net/line_server.h"
#include "petastore/redir/redirector.h"
#include "petastore/storage/storage_engine.h"
#include "petastore/storage/stored_file.h"

namespace fs = std::filesystem;
using namespace petastore;

namespace {

int fail(const Error& e) {
  std::cerr << "error: " << e.to_string() << "\n";
  return 1;
}

Result<std::string> read_text(const std::string& path) {
  if (path.empty() || path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error(ErrorCode::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Status write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  return out ? Status::OK() : Status(Error(ErrorCode::kIoError, "short write to " + path));
}

std::vector<std::string> words(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Runs each non-empty, non-comment line through `handle`, echoing requests.
void run_script(const std::string& text, const std::function<std::string(const std::string&)>& handle) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::cout << "> " << line << "\n" << handle(line) << "\n";
  }
}

// ------------------------------------------------------------------ run / report

int cmd_run(const std::string& scenario_path, std::string trace_path, bool kv_only) {
  auto text = read_text(scenario_path);
  if (!text.ok()) return fail(text.error());
  auto scenario = harness::Scenario::parse(*text);
  if (!scenario.ok()) return fail(scenario.error());
  auto result = harness::run_scenario(*scenario);
  if (!result.ok()) return fail(result.error());
  if (trace_path.empty()) trace_path = fs::path(scenario_path).stem().string() + ".trace.tsv";
  if (auto st = write_text(trace_path, result->trace_text); !st.ok()) return fail(st.error());
  std::cout << (kv_only ? result->report.to_kv() : result->report.to_text());
  std::cerr << "trace: " << trace_path << " (" << result->trace.size() << " rows)\n";
  return 0;
}

int cmd_report(const std::string& trace_path, bool kv_only) {
  auto text = read_text(trace_path);
  if (!text.ok()) return fail(text.error());
  auto trace = harness::parse_trace(*text);
  if (!trace.ok()) return fail(trace.error());
  const auto report = harness::compute_report(*trace);
  std::cout << (kv_only ? report.to_kv() : report.to_text());
  return 0;
}

// ------------------------------------------------------------------ store

std::uint8_t codec_of(const std::string& name) {
  return static_cast<std::uint8_t>(name == "none" ? storage::CodecId::kNone
                                                  : storage::CodecId::kReferenceLz);
}

int cmd_store_pack(const std::string& in, const std::string& out, std::uint32_t block, const std::string& codec) {
  auto data = read_text(in);
  if (!data.ok()) return fail(data.error());
  auto file = storage::build_stored_file(ByteSpan(reinterpret_cast<const std::uint8_t*>(data->data()), data->size()),
                                         codec_of(codec), block);
  if (!file.ok()) return fail(file.error());
  if (auto st = storage::write_image_file(out, *file); !st.ok()) return fail(st.error());
  std::cout << "logical=" << file->logical_size() << " physical=" << file->physical_size()
            << " blocks=" << file->meta.block_count() << " ratio="
            << static_cast<double>(file->logical_size()) / static_cast<double>(file->physical_size())
            << "\n";
  return 0;
}

int cmd_store_info(const std::string& path) {
  auto file = storage::read_image_file(path);
  if (!file.ok()) return fail(file.error());
  std::cout << "codec=" << storage::to_string(static_cast<storage::CodecId>(file->meta.codec))
            << " block_size=" << file->meta.block_size << " logical=" << file->logical_size()
            << " physical=" << file->physical_size() << " blocks=" << file->meta.block_count()
            << "\n";
  return 0;
}

int cmd_store_cat(const std::string& path, std::uint64_t offset, std::uint64_t len, const std::string& out) {
  auto file = storage::read_image_file(path);
  if (!file.ok()) return fail(file.error());
  if (len == 0) len = file->logical_size() - std::min(offset, file->logical_size());
  auto frames = storage::select_frames(*file, offset, len);
  if (!frames.ok()) return fail(frames.error());
  auto bytes = storage::client_decompress(*frames, offset, len);
  if (!bytes.ok()) return fail(bytes.error());
  const std::string_view view(reinterpret_cast<const char*>(bytes->data()), bytes->size());
  if (out.empty()) {
    std::cout.write(view.data(), static_cast<std::streamsize>(view.size()));
  } else if (auto st = write_text(out, view); !st.ok()) {
    return fail(st.error());
  }
  return 0;
}

int cmd_store_corpus(const std::string& out, std::uint64_t seed, std::uint32_t run, std::size_t events) {
  const Bytes data = harness::synthetic_events(seed, run, 0, events);
  auto st = write_text(out, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
  if (!st.ok()) return fail(st.error());
  std::cout << events << " events, " << data.size() << " bytes\n";
  return 0;
}

// ------------------------------------------------------------------ catalog

struct CatalogCtx {
  ManualClock clock;
  locks::LockService locks{clock};
  std::unique_ptr<catalog::Bridge> bridge;
};

Result<std::unique_ptr<CatalogCtx>> open_catalog(const std::string& dir) {
  auto ctx = std::make_unique<CatalogCtx>();
  auto b = catalog::Bridge::open(dir, ctx->locks, ctx->clock);
  if (!b.ok()) return b.error();
  ctx->bridge = std::move(*b);
  return ctx;
}

int cmd_catalog(const std::string& dir, const std::vector<std::string>& args) {
  if (args.empty()) return fail(Error(ErrorCode::kInvalidArgument, "missing catalog verb"));
  auto ctx = open_catalog(dir);
  if (!ctx.ok()) return fail(ctx.error());
  auto& bridge = *(*ctx)->bridge;
  const std::string& verb = args[0];
  auto need = [&](std::size_t n) { return args.size() >= n + 1; };
  auto fed = [&](const std::string& text) { return FederationId::parse(text); };
  if (verb == "fed-add" && need(1)) {
    auto id = fed(args[1]);
    if (!id.ok()) return fail(id.error());
    if (auto st = bridge.register_federation({*id, catalog::FederationStatus::kOnline}); !st.ok()) {
      return fail(st.error());
    }
    std::cout << "registered " << id->to_string() << "\n";
  } else if (verb == "fed-status" && need(2)) {
    auto id = fed(args[1]);
    catalog::FederationStatus status;
    if (!id.ok()) return fail(id.error());
    if (!catalog::parse_federation_status(args[2], &status)) {
      return fail(Error(ErrorCode::kInvalidArgument, "status is ONLINE or OFFLINE"));
    }
    if (auto st = bridge.set_federation_status(*id, status); !st.ok()) return fail(st.error());
  } else if (verb == "feds") {
    for (const auto& d : bridge.federations()) {
      std::cout << d.id.to_string() << "\t" << catalog::to_string(d.status) << "\n";
    }
  } else if (verb == "create" && need(2)) {
    auto id = fed(args[2]);
    if (!id.ok()) return fail(id.error());
    auto info = bridge.create_collection(args[1], *id, CollectionKind::kStream);
    if (!info.ok()) return fail(info.error());
    std::cout << "created " << info->path << " id=" << info->id << "\n";
  } else if (verb == "append" && need(2)) {
    auto entry = bridge.resolve(args[1]);
    if (!entry.ok()) return fail(entry.error());
    const auto count = std::stoull(args[2]);
    auto* store = bridge.store(entry->federation);
    const auto existing = store->info(args[1]);
    if (!existing.ok()) return fail(existing.error());
    std::vector<EventHeader> headers(count);
    for (std::size_t i = 0; i < count; ++i) {
      headers[i].event_id = existing->size + i;
      headers[i].run_number = 1;
      headers[i].set_component(ComponentKind::kTag, {1, (existing->size + i) * 64, 64});
    }
    auto n = store->append_events(args[1], headers);
    if (!n.ok()) return fail(n.error());
    std::cout << "appended " << count << "\n";
  } else if (verb == "skim" && need(4)) {
    auto id = fed(args[2]);
    if (!id.ok()) return fail(id.error());
    std::vector<std::uint64_t> ordinals;
    std::stringstream ss(args[4]);
    for (std::string tok; std::getline(ss, tok, ',');) ordinals.push_back(std::stoull(tok));
    auto info = bridge.create_skim(args[1], *id, args[3], ordinals);
    if (!info.ok()) return fail(info.error());
    std::cout << "created skim " << info->path << " size=" << info->size << "\n";
  } else if (verb == "resolve" && need(1)) {
    auto e = bridge.resolve(args[1]);
    if (!e.ok()) return fail(e.error());
    std::cout << e->path << "\t" << e->federation.to_string() << "\t" << to_string(e->kind) << "\n";
  } else if (verb == "list") {
    for (const auto& e : bridge.entries()) {
      std::cout << e.path << "\t" << e.federation.to_string() << "\t" << to_string(e.kind) << "\n";
    }
  } else if (verb == "read" && need(1)) {
    auto events = bridge.read_collection(args[1]);
    if (!events.ok()) return fail(events.error());
    for (const auto& h : *events) std::cout << h.run_number << "\t" << h.event_id << "\n";
  } else if (verb == "deep-copy" && need(2)) {
    auto id = fed(args[2]);
    if (!id.ok()) return fail(id.error());
    auto path = bridge.deep_copy(args[1], *id);
    if (!path.ok()) return fail(path.error());
    std::cout << "copied to " << *path << "\n";
  } else {
    return fail(Error(ErrorCode::kInvalidArgument, "unknown or incomplete catalog verb: " + verb));
  }
  return 0;
}

// ------------------------------------------------------------------ cdb

Result<std::unique_ptr<cdb::ConditionsStore>> open_cdb(const std::string& dir) {
  if (fs::exists(fs::path(dir) / "store.meta")) {
    return cdb::ConditionsStore::load(dir);
  }
  return std::make_unique<cdb::ConditionsStore>(fs::path(dir).filename().string());
}

int cmd_cdb(const std::string& dir, const std::vector<std::string>& args) {
  if (args.empty()) return fail(Error(ErrorCode::kInvalidArgument, "missing cdb verb"));
  auto opened = open_cdb(dir);
  if (!opened.ok()) return fail(opened.error());
  auto& store = **opened;
  const std::string& verb = args[0];
  auto need = [&](std::size_t n) { return args.size() >= n + 1; };
  bool dirty = false;
  auto print_payload = [&](const Result<cdb::PayloadRef>& ref) {
    if (!ref.ok()) return fail(ref.error());
    auto bytes = store.payload(*ref);
    if (!bytes.ok()) return fail(bytes.error());
    std::cout << std::string(bytes->begin(), bytes->end()) << "\n";
    return 0;
  };
  if (verb == "insert" && need(7)) {
    const std::string& p = args[7];
    auto seq = store.insert({args[1], args[2]}, std::stoll(args[3]), std::stoll(args[4]),
                            sim_time_from_us(std::stoll(args[5])), args[6],
                            ByteSpan(reinterpret_cast<const std::uint8_t*>(p.data()), p.size()));
    if (!seq.ok()) return fail(seq.error());
    std::cout << "seq=" << *seq << "\n";
    dirty = true;
  } else if (verb == "lookup" && need(5)) {
    return print_payload(store.lookup({args[1], args[2]}, std::stoll(args[3]),
                                      sim_time_from_us(std::stoll(args[4])), args[5]));
  } else if (verb == "config" && need(3)) {
    std::map<std::string, std::string> bindings;
    for (std::size_t i = 3; i < args.size(); ++i) {
      const auto eq = args[i].find('=');
      if (eq == std::string::npos) return fail(Error(ErrorCode::kInvalidArgument, "binding is prefix=revision"));
      bindings[args[i].substr(0, eq)] = args[i].substr(eq + 1);
    }
    auto cfg = store.make_config(args[1], bindings, sim_time_from_us(std::stoll(args[2])));
    if (!cfg.ok()) return fail(cfg.error());
    std::cout << cfg->name << " state=" << cfg->state.to_hex() << "\n";
    dirty = true;
  } else if (verb == "lookup-config" && need(4)) {
    return print_payload(store.lookup_config({args[1], args[2]}, std::stoll(args[3]), args[4]));
  } else if (verb == "sweep" && need(1)) {
    auto source = cdb::ConditionsStore::load(args[1]);
    if (!source.ok()) return fail(source.error());
    std::cout << "merged " << cdb::ConditionsStore::sweep(**source, store) << "\n";
    dirty = true;
  } else if (verb == "list") {
    for (const auto& r : store.records()) {
      std::cout << r.key.to_string() << "\t[" << r.t_begin << "," << r.t_end << ")\t" << r.revision
                << "\tinserted_us=" << to_us(r.inserted_at) << "\t" << r.origin_tag << ":" << r.origin_seq
                << "\n";
    }
  } else if (verb == "configs") {
    for (const auto& c : store.configs()) {
      std::cout << c.name << "\tcutoff_us=" << to_us(c.insertion_cutoff) << "\t" << c.state.to_hex();
      for (const auto& [prefix, rev] : c.bindings) std::cout << "\t" << prefix << "=" << rev;
      std::cout << "\n";
    }
  } else {
    return fail(Error(ErrorCode::kInvalidArgument, "unknown or incomplete cdb verb: " + verb));
  }
  if (dirty) {
    if (auto st = store.save(dir); !st.ok()) return fail(st.error());
  }
  return 0;
}

// ------------------------------------------------------------------ locks

int cmd_locks_script(const std::string& path, std::size_t capacity, double heartbeat_s) {
  auto text = read_text(path);
  if (!text.ok()) return fail(text.error());
  ManualClock clock;
  locks::LockServiceConfig cfg;
  cfg.max_connections = capacity;
  cfg.heartbeat_interval = seconds(heartbeat_s);
  locks::LockService service(clock, cfg);
  locks::LockProtocol proto(service, clock);
  run_script(*text, [&](const std::string& line) -> std::string {
    const auto w = words(line);
    if (!w.empty() && w[0] == "TIME" && w.size() == 2) {
      clock.set(sim_time_from_us(std::stoll(w[1])));
      return "OK";
    }
    if (!w.empty() && w[0] == "REAP") {
      std::string out = "REAPED " + std::to_string(service.reap_orphans(clock.now()).size());
      return out;
    }
    if (!w.empty() && w[0] == "STATS") return service.stats_tsv();
    return proto.handle(line);
  });
  return 0;
}

// ------------------------------------------------------------------ redir

int cmd_redir_policy(const std::string& path) {
  redir::PolicyConfig policy;
  if (!path.empty()) {
    auto text = read_text(path);
    if (!text.ok()) return fail(text.error());
    auto p = redir::PolicyConfig::parse(*text);
    if (!p.ok()) return fail(p.error());
    policy = *p;
  }
  std::cout << policy.to_text();
  return 0;
}

// Script commands against one in-process master:
//   SLAVE <id> <address> <capacity_bytes>   FILE <path> <id> <bytes>
//   PLACE <slave> <file_id>                 REPORT <slave> <conns> <files> <bytes_per_s>
//   STATUS <slave> ONLINE|OFFLINE           TIME <us>
//   TICK                                    OPEN|CLOSE <client> <path>
int cmd_redir_script(const std::string& path, const std::string& policy_path) {
  auto text = read_text(path);
  if (!text.ok()) return fail(text.error());
  redir::PolicyConfig policy;
  if (!policy_path.empty()) {
    auto ptext = read_text(policy_path);
    if (!ptext.ok()) return fail(ptext.error());
    auto p = redir::PolicyConfig::parse(*ptext);
    if (!p.ok()) return fail(p.error());
    policy = *p;
  }
  ManualClock clock;
  redir::Master master("m0", clock, policy);
  std::vector<redir::TraceRow> rows;
  master.set_trace_sink([&](const redir::TraceRow& r) { rows.push_back(r); });
  auto status_text = [](const Status& st) { return st.ok() ? std::string("OK") : "ERR " + std::string(to_string(st.code())); };
  run_script(*text, [&](const std::string& line) -> std::string {
    const auto w = words(line);
    const auto n = w.size();
    try {
      if (n == 4 && w[0] == "SLAVE") return status_text(master.register_slave(w[1], w[2], std::stoull(w[3])));
      if (n == 4 && w[0] == "FILE") return status_text(master.register_file(w[1], std::stoull(w[2]), std::stoull(w[3])));
      if (n == 3 && w[0] == "PLACE") return status_text(master.place_file(w[1], std::stoull(w[2])));
      if (n == 5 && w[0] == "REPORT") {
        redir::LoadReport rep{clock.now(), {std::stoull(w[2]), std::stoull(w[3]), std::stod(w[4])}};
        return status_text(master.report_load(w[1], rep));
      }
      if (n == 3 && w[0] == "STATUS") {
        redir::SlaveStatus s;
        if (!redir::parse_slave_status(w[2], &s)) return std::string("ERR MALFORMED");
        return status_text(master.set_slave_status(w[1], s));
      }
      if (n == 2 && w[0] == "TIME") {
        clock.set(sim_time_from_us(std::stoll(w[1])));
        return std::string("OK");
      }
      if (n == 1 && w[0] == "TICK") {
        std::string out;
        for (const auto& a : master.tick(clock.now())) {
          out += std::string(redir::to_string(a.kind)) + " file=" + std::to_string(a.file) +
                 " to=" + a.to + (a.from.empty() ? "" : " from=" + a.from) + "\n";
        }
        return out.empty() ? std::string("NONE") : out.substr(0, out.size() - 1);
      }
      if (n == 3 && (w[0] == "OPEN" || w[0] == "CLOSE")) {
        redir::RedirectorProtocol proto(master, w[1]);
        return proto.handle(w[0] + " " + w[2]);
      }
    } catch (const std::exception&) {
    }
    return std::string("ERR MALFORMED");
  });
  std::cout << "\n" << redir::trace_tsv(rows);
  return 0;
}

// ------------------------------------------------------------------ serve

std::atomic<bool> g_stop{false};

// Serves a scenario's topology on real sockets: the master on `port`, slave i
// on port + 1 + i and the lock service on port + 1 + n_slaves.
int cmd_serve(const std::string& scenario_path, const std::string& host, std::uint16_t port, double duration_s) {
  harness::Scenario s;
  if (!scenario_path.empty()) {
    auto text = read_text(scenario_path);
    if (!text.ok()) return fail(text.error());
    auto parsed = harness::Scenario::parse(*text);
    if (!parsed.ok()) return fail(parsed.error());
    s = *parsed;
  }
  WallClock clock;
  storage::TertiaryStore tertiary;
  std::vector<std::unique_ptr<storage::StorageEngine>> engines;
  for (int i = 0; i < s.n_slaves; ++i) {
    engines.push_back(std::make_unique<storage::StorageEngine>("s" + std::to_string(i), tertiary, clock, s.block_size));
  }
  redir::Master master("m0", clock, s.policy, &tertiary);
  std::vector<std::unique_ptr<net::LineServer>> servers;
  for (int i = 0; i < s.n_slaves; ++i) {
    auto* engine = engines[static_cast<std::size_t>(i)].get();
    servers.push_back(std::make_unique<net::LineServer>([engine](const std::string&) {
      auto proto = std::make_shared<redir::SlaveProtocol>(*engine);
      return [proto](std::string_view line) {
        auto reply = proto->handle(line);
        return reply.header + "\n" + std::string(reply.payload.begin(), reply.payload.end());
      };
    }));
    const auto slave_port = static_cast<std::uint16_t>(port + 1 + i);
    auto bound = servers.back()->start(host, slave_port);
    if (!bound.ok()) return fail(bound.error());
    const std::string id = "s" + std::to_string(i);
    (void)master.register_slave(id, host + ":" + std::to_string(*bound), s.slave_capacity_mib * 1024 * 1024);
    std::cout << "slave " << id << " " << host << ":" << *bound << "\n";
  }
  int next = 0;
  for (int r = 0; r < s.runs_in_parallel; ++r) {
    for (int k = 0; k < s.streams_per_run; ++k) {
      Bytes contents;
      for (int e = k; e < s.events_per_run; e += s.streams_per_run) {
        auto rec = harness::synthetic_events(s.seed, static_cast<std::uint32_t>(r), static_cast<std::uint64_t>(e), 1);
        contents.insert(contents.end(), rec.begin(), rec.end());
      }
      const int slave = next++ % s.n_slaves;
      auto put = engines[static_cast<std::size_t>(slave)]->put_file(contents, codec_of("lz"));
      if (!put.ok()) return fail(put.error());
      const std::string path = "/run" + std::to_string(r) + "/stream" + std::to_string(k);
      (void)master.register_file(path, (*put)->file_id, (*put)->physical_size());
      (void)master.place_file("s" + std::to_string(slave), (*put)->file_id);
      std::cout << "file " << path << " id=" << (*put)->file_id << " on s" << slave << "\n";
    }
  }
  servers.push_back(std::make_unique<net::LineServer>([&master](const std::string& peer) {
    auto proto = std::make_shared<redir::RedirectorProtocol>(master, peer);
    return [proto](std::string_view line) { return proto->handle(line) + "\n"; };
  }));
  auto mport = servers.back()->start(host, port);
  if (!mport.ok()) return fail(mport.error());
  std::cout << "master " << host << ":" << *mport << "\n";

  locks::LockServiceConfig lcfg;
  lcfg.max_connections = s.lock_max_connections;
  lcfg.heartbeat_interval = seconds(s.heartbeat_s);
  lcfg.deadline_intervals = s.deadline_intervals;
  locks::LockService lock_service(clock, lcfg);
  servers.push_back(std::make_unique<net::LineServer>([&](const std::string&) {
    auto proto = std::make_shared<locks::LockProtocol>(lock_service, clock);
    return [proto](std::string_view line) { return proto->handle(line) + "\n"; };
  }));
  auto lport = servers.back()->start(host, static_cast<std::uint16_t>(port + 1 + s.n_slaves));
  if (!lport.ok()) return fail(lport.error());
  std::cout << "locks " << host << ":" << *lport << std::endl;

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s.tick_interval_s));
    for (int i = 0; i < s.n_slaves; ++i) {
      (void)master.report_load("s" + std::to_string(i), {clock.now(), {}});
    }
    for (const auto& a : master.tick(clock.now())) {
      const auto to = static_cast<std::size_t>(std::stoi(a.to.substr(1)));
      if (a.kind == redir::Action::Kind::kStage) {
        (void)engines[to]->fetch_from_tertiary(a.file, a.issued_at);
      } else if (a.kind == redir::Action::Kind::kReplicate) {
        if (auto src = engines[static_cast<std::size_t>(std::stoi(a.from.substr(1)))]->resident(a.file)) {
          engines[to]->install(src);
        }
      } else {
        engines[to]->evict(a.file);
      }
    }
    (void)lock_service.reap_orphans(clock.now());
    if (duration_s > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= duration_s) {
      break;
    }
  }
  for (auto& srv : servers) srv->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"petastore: event store, data server redirector, lock service, conditions database and scenario harness"};
  app.require_subcommand(1);

  std::string scenario, trace_out, trace_in;
  bool kv = false;
  auto* run = app.add_subcommand("run", "Run a scenario file (key=value lines) and print the metrics report");
  run->add_option("scenario", scenario, "Scenario file, '-' for stdin")->required();
  run->add_option("--trace", trace_out, "Trace output path (default <scenario>.trace.tsv)");
  run->add_flag("--kv", kv, "Print only the key=value block");

  auto* report = app.add_subcommand("report", "Recompute the metrics report from a trace file");
  report->add_option("trace", trace_in, "Trace TSV file")->required();
  report->add_flag("--kv", kv, "Print only the key=value block");

  std::string dir;
  std::vector<std::string> rest;
  auto* cat = app.add_subcommand("catalog", "Bridge catalog admin: fed-add, fed-status, feds, create, append, skim, resolve, list, read, deep-copy");
  cat->add_option("--dir", dir, "Catalog directory")->required();
  cat->add_option("args", rest, "Verb and arguments")->required();

  auto* cdbc = app.add_subcommand("cdb", "Conditions database admin: insert, lookup, config, lookup-config, sweep, list, configs");
  cdbc->add_option("--dir", dir, "Store directory")->required();
  cdbc->add_option("args", rest, "Verb and arguments")->required();

  auto* store = app.add_subcommand("store", "Compressed file images");
  store->require_subcommand(1);
  std::string in, out, codec = "lz";
  std::uint32_t block = storage::kDefaultBlockSize;
  std::uint64_t offset = 0, length = 0, seed = 1;
  std::uint32_t run_no = 0;
  std::size_t events = 4096;
  auto* pack = store->add_subcommand("pack", "Compress a file into an image");
  pack->add_option("input", in)->required();
  pack->add_option("output", out)->required();
  pack->add_option("--block-size", block);
  pack->add_option("--codec", codec)->check(CLI::IsMember({"none", "lz"}));
  auto* info = store->add_subcommand("info", "Show image metadata (verifies the digest)");
  info->add_option("image", in)->required();
  auto* scat = store->add_subcommand("cat", "Decompress a byte range of an image");
  scat->add_option("image", in)->required();
  scat->add_option("--offset", offset);
  scat->add_option("--length", length, "0 reads to the end");
  scat->add_option("-o,--output", out);
  auto* corpus = store->add_subcommand("corpus", "Write synthetic event records");
  corpus->add_option("output", out)->required();
  corpus->add_option("--seed", seed);
  corpus->add_option("--run", run_no);
  corpus->add_option("--events", events);

  auto* lk = app.add_subcommand("locks", "Lock service tools");
  lk->require_subcommand(1);
  std::string script;
  std::size_t capacity = 1024;
  double heartbeat = 5;
  auto* lscript = lk->add_subcommand("script", "Run CONN/LOCK/UNLK/PING lines (plus TIME <us>, REAP, STATS)");
  lscript->add_option("file", script, "Script file, default stdin");
  lscript->add_option("--capacity", capacity);
  lscript->add_option("--heartbeat-s", heartbeat);

  auto* rd = app.add_subcommand("redir", "Redirector tools");
  rd->require_subcommand(1);
  std::string policy;
  auto* rpolicy = rd->add_subcommand("policy", "Validate a policy file and print it normalized");
  rpolicy->add_option("file", policy);
  auto* rscript = rd->add_subcommand("script", "Drive one master with SLAVE/FILE/PLACE/REPORT/STATUS/TIME/TICK/OPEN/CLOSE lines");
  rscript->add_option("file", script, "Script file, default stdin");
  rscript->add_option("--policy", policy);

  std::string host = "127.0.0.1";
  std::uint16_t port = 1094;
  double duration = 0;
  auto* serve = app.add_subcommand("serve", "Serve a scenario's master, slaves and lock service over TCP");
  serve->add_option("--scenario", scenario);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--duration-s", duration, "Stop after this many seconds (0 runs until interrupted)");

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(scenario, trace_out, kv);
  if (*report) return cmd_report(trace_in, kv);
  if (*cat) return cmd_catalog(dir, rest);
  if (*cdbc) return cmd_cdb(dir, rest);
  if (*pack) return cmd_store_pack(in, out, block, codec);
  if (*info) return cmd_store_info(in);
  if (*scat) return cmd_store_cat(in, offset, length, out);
  if (*corpus) return cmd_store_corpus(out, seed, run_no, events);
  if (*lscript) return cmd_locks_script(script, capacity, heartbeat);
  if (*rpolicy) return cmd_redir_policy(policy);
  if (*rscript) return cmd_redir_script(script, policy);
  if (*serve) return cmd_serve(scenario, host, port, duration);
  return 0;
}
