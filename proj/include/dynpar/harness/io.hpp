#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynpar/listseq.hpp"
#include "dynpar/treecontract.hpp"

namespace dynpar::harness {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what) {}
};

namespace detail {

// Calls fn(line_number, fields) for every non-blank line; '#' starts a comment.
inline void for_each_line(std::istream& in, const std::function<void(std::size_t, std::istringstream&)>& fn) {
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    fn(number, fields);
  }
}

template <typename T>
T field(std::istringstream& in, const std::string& source, std::size_t line, std::string_view what) {
  T value;
  if (!(in >> value)) throw ParseError(source, line, "expected " + std::string(what));
  return value;
}

inline void expect_end(std::istringstream& in, const std::string& source, std::size_t line) {
  std::string rest;
  if (in >> rest) throw ParseError(source, line, "unexpected '" + rest + "'");
}

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace detail

// Header `n m`, then m lines `u v [weight]` (weight defaults to 1).
inline ForestInput read_forest(std::istream& in, const std::string& source = "forest") {
  ForestInput f;
  bool header = false;
  std::size_t m = 0;
  detail::for_each_line(in, [&](std::size_t line, std::istringstream& fields) {
    if (!header) {
      f.n = detail::field<VertexId>(fields, source, line, "vertex count");
      m = detail::field<std::size_t>(fields, source, line, "edge count");
      detail::expect_end(fields, source, line);
      header = true;
      return;
    }
    if (f.edges.size() == m) throw ParseError(source, line, "more edges than the header declares");
    WeightedEdge e;
    e.u = detail::field<VertexId>(fields, source, line, "edge endpoint");
    e.v = detail::field<VertexId>(fields, source, line, "edge endpoint");
    e.weight = 1;
    if (!(fields >> std::ws).eof()) e.weight = detail::field<Weight>(fields, source, line, "edge weight");
    detail::expect_end(fields, source, line);
    if (e.u >= f.n || e.v >= f.n) throw ParseError(source, line, "edge endpoint out of range");
    f.edges.push_back(e);
  });
  if (!header) throw ParseError(source, 1, "missing `n m` header");
  if (f.edges.size() != m) throw ParseError(source, 0, "fewer edges than the header declares");
  return f;
}

inline ForestInput read_forest_file(const std::string& path) {
  auto in = detail::open(path);
  return read_forest(in, path);
}

// Lines `v w`; unlisted vertices weigh 0.
inline void read_vertex_weights(std::istream& in, ForestInput& f, const std::string& source = "weights") {
  f.vertex_weights.assign(f.n, 0);
  detail::for_each_line(in, [&](std::size_t line, std::istringstream& fields) {
    const auto v = detail::field<VertexId>(fields, source, line, "vertex");
    const auto w = detail::field<Weight>(fields, source, line, "weight");
    detail::expect_end(fields, source, line);
    if (v >= f.n) throw ParseError(source, line, "vertex out of range");
    f.vertex_weights[v] = w;
  });
}

inline void read_vertex_weights_file(const std::string& path, ForestInput& f) {
  auto in = detail::open(path);
  read_vertex_weights(in, f, path);
}

inline void write_forest(std::ostream& out, const ForestInput& f) {
  out << f.n << ' ' << f.edges.size() << '\n';
  for (const auto& e : f.edges) out << e.u << ' ' << e.v << ' ' << e.weight << '\n';
}

struct EdgeBatch {
  bool link = true;
  std::vector<WeightedEdge> edges;  // weights unused for cuts
};

// Lines `+ u v [w]` and `- u v`. Consecutive lines of one sign form a
// batch; a blank line also ends a batch.
inline std::vector<EdgeBatch> read_batches(std::istream& in, const std::string& source = "batch") {
  std::vector<EdgeBatch> out;
  std::string line;
  bool open_batch = false;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      open_batch = false;
      continue;
    }
    std::istringstream fields(line);
    const auto sign = detail::field<std::string>(fields, source, number, "'+' or '-'");
    if (sign != "+" && sign != "-") throw ParseError(source, number, "expected '+' or '-', got '" + sign + "'");
    const bool link = sign == "+";
    WeightedEdge e;
    e.u = detail::field<VertexId>(fields, source, number, "edge endpoint");
    e.v = detail::field<VertexId>(fields, source, number, "edge endpoint");
    e.weight = 1;
    if (link && !(fields >> std::ws).eof()) e.weight = detail::field<Weight>(fields, source, number, "edge weight");
    detail::expect_end(fields, source, number);
    if (!open_batch || out.back().link != link) out.push_back(EdgeBatch{link, {}});
    out.back().edges.push_back(e);
    open_batch = true;
  }
  return out;
}

inline std::vector<EdgeBatch> read_batches_file(const std::string& path) {
  auto in = detail::open(path);
  return read_batches(in, path);
}

struct ChainsInput {
  std::vector<std::vector<NodeId>> chains;
  std::vector<long long> values;
  std::vector<Sequence<long long>::Node> nodes() const {
    return chains_to_nodes<long long>(values.size(), chains, values);
  }
};

// One chain per line, `id:value` tokens in list order. Ids must cover
// 0..n-1 exactly once.
inline ChainsInput read_chains(std::istream& in, const std::string& source = "chains") {
  ChainsInput out;
  std::vector<bool> seen;
  detail::for_each_line(in, [&](std::size_t line, std::istringstream& fields) {
    std::vector<NodeId> chain;
    std::string token;
    while (fields >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) throw ParseError(source, line, "expected id:value, got '" + token + "'");
      std::size_t used_id = 0, used_value = 0;
      unsigned long id = 0;
      long long value = 0;
      try {
        id = std::stoul(token.substr(0, colon), &used_id);
        value = std::stoll(token.substr(colon + 1), &used_value);
      } catch (const std::exception&) {
        throw ParseError(source, line, "malformed token '" + token + "'");
      }
      if (used_id != colon || used_value != token.size() - colon - 1 || id >= kNullNode)
        throw ParseError(source, line, "malformed token '" + token + "'");
      if (id >= seen.size()) {
        seen.resize(id + 1, false);
        out.values.resize(id + 1, 0);
      }
      if (seen[id]) throw ParseError(source, line, "node " + std::to_string(id) + " listed twice");
      seen[id] = true;
      out.values[id] = value;
      chain.push_back(static_cast<NodeId>(id));
    }
    out.chains.push_back(std::move(chain));
  });
  for (std::size_t id = 0; id < seen.size(); ++id)
    if (!seen[id]) throw ParseError(source, 0, "node " + std::to_string(id) + " is missing");
  return out;
}

inline ChainsInput read_chains_file(const std::string& path) {
  auto in = detail::open(path);
  return read_chains(in, path);
}

// Whitespace-separated integers.
inline std::vector<long long> read_values(std::istream& in, const std::string& source = "values") {
  std::vector<long long> out;
  detail::for_each_line(in, [&](std::size_t line, std::istringstream& fields) {
    std::string token;
    while (fields >> token) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size()) throw ParseError(source, line, "expected an integer, got '" + token + "'");
      out.push_back(v);
    }
  });
  return out;
}

inline std::vector<long long> read_values_file(const std::string& path) {
  auto in = detail::open(path);
  return read_values(in, path);
}

enum class QueryType { kConnected, kRepr, kSubtree, kPathMax };

inline QueryType parse_query_type(std::string_view s) {
  if (s == "connected") return QueryType::kConnected;
  if (s == "repr") return QueryType::kRepr;
  if (s == "subtree") return QueryType::kSubtree;
  if (s == "pathmax") return QueryType::kPathMax;
  throw std::invalid_argument("unknown query type '" + std::string(s) + "'");
}

struct Query {
  QueryType type;
  VertexId a = 0;
  VertexId b = 0;  // unused for repr
};

// One query per line: `connected u v`, `repr u`, `subtree r u`, `pathmax u v`.
inline std::vector<Query> read_queries(std::istream& in, const std::string& source = "queries") {
  std::vector<Query> out;
  detail::for_each_line(in, [&](std::size_t line, std::istringstream& fields) {
    const auto name = detail::field<std::string>(fields, source, line, "query type");
    Query q{};
    try {
      q.type = parse_query_type(name);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line, e.what());
    }
    q.a = detail::field<VertexId>(fields, source, line, "vertex");
    if (q.type != QueryType::kRepr) q.b = detail::field<VertexId>(fields, source, line, "vertex");
    detail::expect_end(fields, source, line);
    out.push_back(q);
  });
  return out;
}

inline std::vector<Query> read_queries_file(const std::string& path) {
  auto in = detail::open(path);
  return read_queries(in, path);
}

}  // namespace dynpar::harness
