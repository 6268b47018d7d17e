// dynpar: command-line front end for the dynamic forest, sequence and
// map-reduce structures, the scaling runner and the self-test.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynpar/harness/generators.hpp"
#include "dynpar/harness/io.hpp"
#include "dynpar/harness/scaling.hpp"
#include "dynpar/harness/selftest.hpp"
#include "dynpar/listseq.hpp"
#include "dynpar/mapreduce.hpp"
#include "dynpar/rctree.hpp"

namespace {

using namespace dynpar;
using namespace dynpar::harness;

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string format = "text";
  bool debug_consistency = false;

  EngineOptions engine() const {
    EngineOptions o;
    o.threads = threads;
    return o;
  }
  bool csv() const { return format == "csv"; }
  bool checking() const {
#ifndef NDEBUG
    return true;
#else
    return debug_consistency;
#endif
  }
};

// --- forests --------------------------------------------------------------

struct ForestArgs {
  std::string input;
  std::string vertex_weights;
  std::string batch;
  std::string output;
};

void add_forest_args(CLI::App* cmd, ForestArgs& a) {
  cmd->add_option("--input,-i", a.input, "forest file: `n m`, then `u v [weight]` per edge")->required();
  cmd->add_option("--vertex-weights", a.vertex_weights, "vertex weight file: `v weight` per line");
  cmd->add_option("--batch", a.batch, "batch file: `+ u v [w]` / `- u v` lines, applied in order");
}

ForestInput load_forest(const ForestArgs& a) {
  ForestInput f = read_forest_file(a.input);
  if (!a.vertex_weights.empty()) read_vertex_weights_file(a.vertex_weights, f);
  return f;
}

void check_forest(const Globals& g, const DynamicForest& df) {
  if (!g.checking()) return;
  if (auto err = df.check_consistency()) throw std::logic_error("consistency check failed: " + *err);
}

void print_batch(const Globals& g, bool link, std::size_t k, const DynamicForest& df, double ms) {
  const auto& st = df.contraction().engine().stats();
  if (g.csv())
    std::cout << (link ? "link" : "cut") << ',' << k << ',' << st.affected_total() << ',' << st.affected_at(0) << ','
              << df.contraction().rounds() << ',' << ms << '\n';
  else
    std::cout << (link ? "link" : "cut") << " k=" << k << " affected=" << st.affected_total()
              << " round0=" << st.affected_at(0) << " rounds=" << df.contraction().rounds() << " time_ms=" << ms
              << '\n';
}

void apply_batch(const Globals& g, DynamicForest& df, const EdgeBatch& b, bool report) {
  const auto t0 = std::chrono::steady_clock::now();
  if (b.link) {
    df.batch_link(b.edges);
  } else {
    std::vector<EdgeKey> cut;
    for (const auto& e : b.edges) cut.push_back(edge_key(e.u, e.v));
    df.batch_cut(cut);
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  check_forest(g, df);
  if (report) print_batch(g, b.link, b.edges.size(), df, ms);
}

void apply_batch_file(const Globals& g, DynamicForest& df, const ForestArgs& a, bool report) {
  if (a.batch.empty()) return;
  for (const auto& b : read_batches_file(a.batch)) apply_batch(g, df, b, report);
}

void print_header(const Globals& g, const char* header) {
  if (g.csv()) std::cout << header << '\n';
}

std::size_t component_count(const DynamicForest& df) {
  std::vector<VertexId> all(df.size());
  std::iota(all.begin(), all.end(), VertexId{0});
  auto reprs = df.batch_find_repr(all).representative;
  std::sort(reprs.begin(), reprs.end());
  return static_cast<std::size_t>(std::unique(reprs.begin(), reprs.end()) - reprs.begin());
}

int run_build(const Globals& g, const ForestArgs& a) {
  const ForestInput f = load_forest(a);
  const auto t0 = std::chrono::steady_clock::now();
  DynamicForest df(f, g.seed, g.engine());
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  check_forest(g, df);
  const auto& tc = df.contraction();
  const auto& st = tc.engine().stats();
  const std::size_t comps = component_count(df);
  if (g.csv())
    std::cout << "vertices,edges,reduced_vertices,rounds,initial_work,rc_nodes,components,wall_time_ms\n"
              << f.n << ',' << f.edges.size() << ',' << tc.vertex_count() << ',' << tc.rounds() << ','
              << st.initial_work() << ',' << df.rc().node_count() << ',' << comps << ',' << ms << '\n';
  else
    std::cout << "vertices=" << f.n << " edges=" << f.edges.size() << " reduced_vertices=" << tc.vertex_count()
              << " rounds=" << tc.rounds() << " initial_work=" << st.initial_work()
              << " rc_nodes=" << df.rc().node_count() << " components=" << comps << " time_ms=" << ms << '\n';
  return 0;
}

std::vector<WeightedEdge> positional_edges(const std::vector<VertexId>& ids, const std::vector<Weight>& weights) {
  if (ids.size() % 2) throw UsageError("edges are given as vertex pairs");
  if (!weights.empty() && weights.size() != ids.size() / 2) throw UsageError("one weight per edge expected");
  std::vector<WeightedEdge> out;
  for (std::size_t q = 0; q < ids.size(); q += 2)
    out.push_back({ids[q], ids[q + 1], weights.empty() ? Weight{1} : weights[q / 2]});
  return out;
}

int run_edges(const Globals& g, const ForestArgs& a, bool link, const std::vector<VertexId>& ids,
              const std::vector<Weight>& weights) {
  const auto edges = positional_edges(ids, weights);
  const ForestInput f = load_forest(a);
  DynamicForest df(f, g.seed, g.engine());
  print_header(g, "op,k,affected_total,affected_round0,rounds,wall_time_ms");
  apply_batch_file(g, df, a, true);
  if (!edges.empty()) apply_batch(g, df, EdgeBatch{link, edges}, true);
  if (!a.output.empty()) {
    ForestInput out;
    out.n = df.size();
    out.edges = df.edges();
    std::ofstream file(a.output);
    if (!file) throw std::runtime_error("cannot write " + a.output);
    write_forest(file, out);
  }
  return 0;
}

std::string answer(const DynamicForest& df, const Query& q) {
  switch (q.type) {
    case QueryType::kConnected: return df.connected(q.a, q.b) ? "true" : "false";
    case QueryType::kRepr: return std::to_string(df.find_repr(q.a));
    case QueryType::kSubtree: {
      std::ostringstream s;
      s << df.subtree_sum(q.a, q.b);
      return s.str();
    }
    case QueryType::kPathMax: {
      if (!df.connected(q.a, q.b)) throw TreeError("path query between disconnected vertices");
      const auto m = df.path_max(q.a, q.b);
      if (!m) return "none";
      std::ostringstream s;
      s << m->first << ' ' << m->second.first << ' ' << m->second.second;
      return s.str();
    }
  }
  return "";
}

struct QueryArgs {
  std::string type;
  std::vector<VertexId> vertices;
  std::string queries;
};

void add_query_args(CLI::App* cmd, ForestArgs& a, QueryArgs& q) {
  add_forest_args(cmd, a);
  cmd->add_option("--type,-t", q.type, "connected | repr | subtree | pathmax")
      ->check(CLI::IsMember({"connected", "repr", "subtree", "pathmax"}));
  cmd->add_option("vertices", q.vertices, "query vertices: `u v`, or `u` for repr");
  cmd->add_option("--queries", q.queries, "query file: one `type u [v]` per line");
}

int run_query(const Globals& g, const ForestArgs& a, const QueryArgs& qa) {
  std::vector<Query> queries;
  if (!qa.type.empty()) {
    Query q{parse_query_type(qa.type)};
    const std::size_t want = q.type == QueryType::kRepr ? 1 : 2;
    if (qa.vertices.size() != want)
      throw UsageError("--type " + qa.type + " takes " + std::to_string(want) + " vertex argument(s)");
    q.a = qa.vertices[0];
    if (want == 2) q.b = qa.vertices[1];
    queries.push_back(q);
  } else if (!qa.vertices.empty()) {
    throw UsageError("vertex arguments need --type");
  }
  if (!qa.queries.empty()) {
    const auto more = read_queries_file(qa.queries);
    queries.insert(queries.end(), more.begin(), more.end());
  }
  if (queries.empty()) throw UsageError("nothing to query: give --type with vertices, or --queries");
  const ForestInput f = load_forest(a);
  DynamicForest df(f, g.seed, g.engine());
  check_forest(g, df);
  apply_batch_file(g, df, a, false);
  for (const auto& q : queries) {
    if (q.a >= df.size() || q.b >= df.size()) throw TreeError("query vertex out of range");
    std::cout << answer(df, q) << '\n';
  }
  return 0;
}

// --- sequences ------------------------------------------------------------

using Seq = Sequence<long long>;

void check_seq(const Globals& g, const Seq& s, const std::vector<Seq::Node>& nodes) {
  if (!g.checking()) return;
  const Seq fresh(nodes, {}, g.seed, g.engine());
  if (!(fresh.engine().store().snapshot() == s.engine().store().snapshot()) ||
      !(fresh.engine().trace() == s.engine().trace()))
    throw std::logic_error("consistency check failed: propagated sequence differs from a fresh run");
}

// Current chains, read back from the structure, in `id:value` form.
void print_chains(const Seq& s) {
  for (NodeId u = 0; u < s.size(); ++u) {
    if (s.prev(u) != kNullNode) continue;
    const char* sep = "";
    for (NodeId x = u; x != kNullNode; x = s.next(x)) {
      std::cout << sep << x << ':' << s.value(x);
      sep = " ";
    }
    std::cout << '\n';
  }
}

std::vector<Seq::Node> current_nodes(const Seq& s) {
  std::vector<Seq::Node> nodes(s.size());
  for (NodeId u = 0; u < s.size(); ++u) nodes[u] = {s.prev(u), s.next(u), s.value(u)};
  return nodes;
}

std::vector<std::pair<NodeId, NodeId>> node_pairs(const std::vector<NodeId>& ids) {
  if (ids.size() % 2) throw UsageError("nodes are given in pairs");
  std::vector<std::pair<NodeId, NodeId>> out;
  for (std::size_t q = 0; q < ids.size(); q += 2) out.emplace_back(ids[q], ids[q + 1]);
  return out;
}

int run_seq(const Globals& g, const std::string& what, const std::string& input, const std::vector<NodeId>& ids) {
  const ChainsInput in = read_chains_file(input);
  const auto nodes = in.nodes();
  Seq s(nodes, {}, g.seed, g.engine());
  check_seq(g, s, nodes);
  if (what == "build") {
    const auto& st = s.engine().stats();
    if (g.csv())
      std::cout << "nodes,lists,rounds,initial_work\n"
                << s.size() << ',' << in.chains.size() << ',' << s.rounds() << ',' << st.initial_work() << '\n';
    else
      std::cout << "nodes=" << s.size() << " lists=" << in.chains.size() << " rounds=" << s.rounds()
                << " initial_work=" << st.initial_work() << '\n';
    return 0;
  }
  if (what == "query") {
    for (const auto& [u, v] : node_pairs(ids)) std::cout << s.query(u, v) << '\n';
    return 0;
  }
  if (what == "join") {
    s.batch_join(node_pairs(ids));
  } else {
    if (ids.empty()) throw UsageError("split needs at least one node");
    s.batch_split(ids);
  }
  check_seq(g, s, current_nodes(s));
  print_chains(s);
  return 0;
}

// --- map-reduce -----------------------------------------------------------

std::pair<std::size_t, long long> parse_update(const std::string& text) {
  const auto eq = text.find('=');
  std::size_t used_i = 0, used_v = 0;
  try {
    if (eq == std::string::npos) throw std::invalid_argument(text);
    const std::size_t idx = std::stoull(text.substr(0, eq), &used_i);
    const long long value = std::stoll(text.substr(eq + 1), &used_v);
    if (used_i == eq && used_v == text.size() - eq - 1) return {idx, value};
  } catch (const std::logic_error&) {
  }
  throw UsageError("--update expects idx=value, got '" + text + "'");
}

template <typename Op>
int run_mapreduce_with(const Globals& g, const std::vector<long long>& values, Op op, long long identity,
                       const std::vector<std::string>& updates, const std::vector<std::size_t>& range) {
  std::vector<long long> current = values;
  MapReduce<long long, Op> mr(current, op, identity, {}, g.engine());
  auto check = [&] {
    if (!g.checking()) return;
    const MapReduce<long long, Op> fresh(current, op, identity, {}, g.engine());
    if (!(fresh.engine().store().snapshot() == mr.engine().store().snapshot()))
      throw std::logic_error("consistency check failed: propagated map-reduce differs from a fresh run");
  };
  check();
  std::vector<std::pair<std::size_t, long long>> batch;
  for (const auto& u : updates) batch.push_back(parse_update(u));
  if (!batch.empty()) {
    mr.update(batch);
    for (const auto& [i, v] : batch) current[i] = v;
    check();
    std::cout << "reexecuted " << mr.engine().stats().reexecuted_total() << '\n';
  }
  std::cout << "total " << mr.total() << '\n';
  if (!range.empty()) std::cout << "range " << range[0] << ' ' << range[1] << ' ' << mr.range(range[0], range[1]) << '\n';
  return 0;
}

int run_mapreduce(const Globals& g, const std::string& input, const std::string& op,
                  const std::vector<std::string>& updates, const std::vector<std::size_t>& range) {
  const auto values = read_values_file(input);
  if (values.empty()) throw std::invalid_argument(input + ": no values");
  constexpr auto lo = std::numeric_limits<long long>::min();
  constexpr auto hi = std::numeric_limits<long long>::max();
  if (op == "max")
    return run_mapreduce_with(g, values, [](long long a, long long b) { return std::max(a, b); }, lo, updates, range);
  if (op == "min")
    return run_mapreduce_with(g, values, [](long long a, long long b) { return std::min(a, b); }, hi, updates, range);
  return run_mapreduce_with(g, values, std::plus<long long>{}, 0, updates, range);
}

// --- experiments ----------------------------------------------------------

struct ScaleArgs {
  std::string structure = "path";
  VertexId n = 1 << 12;
  std::vector<std::size_t> ks{1};
  std::vector<std::uint64_t> seeds;
  std::size_t max_degree = 0;
  std::string output;
};

int run_scale(const Globals& g, const ScaleArgs& a) {
  ExperimentConfig cfg;
  cfg.structure = parse_structure(a.structure);
  cfg.n = a.n;
  cfg.ks = a.ks;
  cfg.seeds = a.seeds.empty() ? std::vector<std::uint64_t>{g.seed} : a.seeds;
  cfg.max_degree = a.max_degree;
  cfg.options = g.engine();
  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output);
    if (!file) throw std::runtime_error("cannot write " + a.output);
  }
  std::ostream& out = a.output.empty() ? std::cout : file;
  out << kStatsHeader << '\n';
  const auto rows = run_scaling(cfg, [&](const StatsRow& r) { write_row(out, r), out.flush(); });
  write_summary(out, "affected", summarize_affected(rows));
  write_summary(out, "rc_touched", summarize_touched(rows));
  return 0;
}

int run_selftest_cmd(const Globals& g, std::size_t trials, std::size_t seed_count, std::size_t max_n) {
  SelftestConfig cfg;
  cfg.seeds.clear();
  for (std::size_t s = 0; s < seed_count; ++s) cfg.seeds.push_back(g.seed + s);
  cfg.trials_per_seed = trials;
  cfg.max_n = max_n;
  cfg.options = g.engine();
  const auto rep = run_selftest(cfg);
  std::cout << "trials=" << rep.trials << " mutations=" << rep.mutations << " state_checks=" << rep.state_checks
            << " state_mismatches=" << rep.state_mismatches << " query_checks=" << rep.query_checks
            << " query_mismatches=" << rep.query_mismatches << " restricted_failures=" << rep.restricted_failures
            << " round0_over_3k=" << rep.round0_over << "/" << rep.edge_batches << '\n';
  for (const auto& f : rep.failures) std::cout << "  " << f << '\n';
  std::cout << (rep.ok() ? "ok" : "FAILED") << '\n';
  return rep.ok() ? 0 : kDataError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch-dynamic trees, sequences and map-reduce by change propagation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed for coin flips and generators");
  app.add_option("--threads", g.threads, "engine worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"text", "csv"}));
  app.add_flag("--debug-consistency", g.debug_consistency, "check every update against a fresh run");

  ForestArgs build_args;
  auto* build = app.add_subcommand("build", "build a forest and print its statistics");
  add_forest_args(build, build_args);

  ForestArgs link_args, cut_args;
  std::vector<VertexId> link_ids, cut_ids;
  std::vector<Weight> link_weights;
  auto* link = app.add_subcommand("link", "link edges `u v ...` into a forest");
  add_forest_args(link, link_args);
  link->add_option("edges", link_ids, "vertex pairs");
  link->add_option("--weights", link_weights, "one weight per edge")->delimiter(',');
  link->add_option("--output,-o", link_args.output, "write the resulting forest");
  auto* cut = app.add_subcommand("cut", "cut edges `u v ...` from a forest");
  add_forest_args(cut, cut_args);
  cut->add_option("edges", cut_ids, "vertex pairs");
  cut->add_option("--output,-o", cut_args.output, "write the resulting forest");

  ForestArgs query_args, rc_query_args;
  QueryArgs query_q, rc_query_q;
  auto* query = app.add_subcommand("query", "answer connectivity, representative, subtree or path queries");
  add_query_args(query, query_args, query_q);
  auto* rc = app.add_subcommand("rc", "RC forest commands");
  rc->require_subcommand(1);
  auto* rc_query = rc->add_subcommand("query", "same as the top-level query command");
  add_query_args(rc_query, rc_query_args, rc_query_q);

  std::string seq_input;
  std::vector<NodeId> seq_ids;
  auto* seq = app.add_subcommand("seq", "batch-dynamic sequences");
  seq->require_subcommand(1);
  std::map<std::string, CLI::App*> seq_cmds;
  for (const char* name : {"build", "join", "split", "query"}) {
    auto* c = seq->add_subcommand(name);
    c->add_option("--input,-i", seq_input, "chains file: one chain per line of `id:value` tokens")->required();
    if (std::string(name) != "build") c->add_option("nodes", seq_ids, "node ids");
    seq_cmds[name] = c;
  }
  seq_cmds["build"]->description("build the sequences and print statistics");
  seq_cmds["join"]->description("join tail u to head v for each pair `u v`, print the chains");
  seq_cmds["split"]->description("split after each node, print the chains");
  seq_cmds["query"]->description("fold of the values from u through v for each pair `u v`");

  std::string mr_input, mr_op = "sum";
  std::vector<std::string> mr_updates;
  std::vector<std::size_t> mr_range;
  auto* mr = app.add_subcommand("mapreduce", "map-reduce over an array with updates and range folds");
  mr->add_option("--input,-i", mr_input, "whitespace-separated integers")->required();
  mr->add_option("--op", mr_op, "reduction")->check(CLI::IsMember({"sum", "max", "min"}));
  mr->add_option("--update", mr_updates, "idx=value, applied as one batch");
  mr->add_option("--range", mr_range, "inclusive index range `i j`")->expected(2);

  ScaleArgs scale_args;
  auto* scale = app.add_subcommand("scale", "cut-batch scaling experiment, CSV output");
  scale->add_option("--structure", scale_args.structure)
      ->check(CLI::IsMember({"path", "random-tree", "star", "binary-tree"}));
  scale->add_option("--n", scale_args.n, "tree size")->check(CLI::Range(2u, std::numeric_limits<VertexId>::max() - 1));
  scale->add_option("--k", scale_args.ks, "batch sizes")->delimiter(',');
  scale->add_option("--seeds", scale_args.seeds, "seeds (default: --seed)")->delimiter(',');
  scale->add_option("--max-degree", scale_args.max_degree, "degree cap for random trees");
  scale->add_option("--output,-o", scale_args.output, "CSV path (default: stdout)");

  std::size_t st_trials = 300, st_seeds = 1, st_max_n = 256;
  auto* selftest = app.add_subcommand("selftest", "randomized comparison against fresh runs and oracles");
  selftest->add_option("--trials", st_trials, "trials per seed");
  selftest->add_option("--seeds", st_seeds, "number of seeds, counting up from --seed");
  selftest->add_option("--max-n", st_max_n, "largest structure")->check(CLI::Range(2, 1 << 16));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*build) return run_build(g, build_args);
    if (*link) return run_edges(g, link_args, true, link_ids, link_weights);
    if (*cut) return run_edges(g, cut_args, false, cut_ids, {});
    if (*query) return run_query(g, query_args, query_q);
    if (*rc_query) return run_query(g, rc_query_args, rc_query_q);
    for (const auto& [name, c] : seq_cmds)
      if (*c) return run_seq(g, name, seq_input, seq_ids);
    if (*mr) return run_mapreduce(g, mr_input, mr_op, mr_updates, mr_range);
    if (*scale) return run_scale(g, scale_args);
    if (*selftest) return run_selftest_cmd(g, st_trials, st_seeds, st_max_n);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}
