#include "relaygen/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "relaygen/binary_io.hpp"

namespace relaygen {

namespace {

std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[256];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

std::string num(double x) { return strf("%.10g", x); }

void check_id(const std::string& id) {
  if (id.empty() || id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
    throw std::invalid_argument("id not representable in csv: '" + id + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_num(const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad numeric field '" + s + "'");
  }
}

// "# name v1; key=value; key=value" -> (name, version, kv map)
struct MetaLine {
  std::string name;
  int version = 0;
  std::map<std::string, std::string> kv;
};

MetaLine parse_meta_line(const std::string& line, const std::string& expect_name) {
  if (line.rfind("# ", 0) != 0) throw FormatError("missing metadata line");
  MetaLine m;
  std::stringstream ss(line.substr(2));
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ';')) {
    while (!part.empty() && part.front() == ' ') part.erase(part.begin());
    while (!part.empty() && (part.back() == ' ' || part.back() == '\r')) part.pop_back();
    if (first) {
      const size_t sp = part.rfind(' ');
      if (sp == std::string::npos) throw FormatError("bad metadata line '" + line + "'");
      m.name = part.substr(0, sp);
      const std::string ver = part.substr(sp + 1);
      if (ver.size() < 2 || ver[0] != 'v') throw FormatError("bad schema version '" + ver + "'");
      m.version = std::stoi(ver.substr(1));
      first = false;
    } else {
      const size_t eq = part.find('=');
      if (eq == std::string::npos) throw FormatError("bad metadata field '" + part + "'");
      m.kv[part.substr(0, eq)] = part.substr(eq + 1);
    }
  }
  if (m.name != expect_name)
    throw FormatError("expected '" + expect_name + "' metadata, found '" + m.name + "'");
  return m;
}

constexpr const char* kMatrixHeader =
    "test_id,stranger_id,test_algo,stranger_algo,n_states,failure_rate,failure_std,"
    "mean_return,return_std,reference_rate";
constexpr const char* kStatesHeader =
    "test_id,stranger_id,state_id,t_index,failed,steps_survived,q_at_takeover,"
    "stranger_remaining_return";
constexpr const char* kOrdinaryHeader =
    "agent_id,algorithm_id,n_episodes,mean_return,return_std,failure_rate,mean_length";

}  // namespace

std::string failure_mode_name(FailureMode mode) {
  return mode == FailureMode::kTermination ? "termination" : "return-threshold";
}

void write_matrix_csv(const std::string& path, const RelayMatrix& matrix,
                      const std::string& env_id, double return_threshold) {
  for (const auto& id : matrix.test_ids) check_id(id);
  for (const auto& id : matrix.stranger_ids) check_id(id);
  auto out = open_out(path);
  out << "# relay-matrix-csv v" << kReportSchemaVersion << "; env=" << env_id
      << "; horizon=" << matrix.horizon
      << "; failure_mode=" << failure_mode_name(matrix.failure_mode)
      << "; return_threshold=" << num(return_threshold) << "\n";
  out << kMatrixHeader << "\n";
  for (const RelayCell& cell : matrix.cells) {
    if (!cell.error.empty()) continue;  // hole
    const double ref = matrix.reference_rate(cell.stranger_index);
    out << matrix.test_ids[cell.test_index] << ',' << matrix.stranger_ids[cell.stranger_index]
        << ',' << matrix.test_algos[cell.test_index] << ','
        << matrix.stranger_algos[cell.stranger_index] << ',' << cell.stats.n_states << ','
        << num(cell.stats.failure_rate) << ',' << num(cell.stats.failure_std) << ','
        << num(cell.stats.mean_return) << ',' << num(cell.stats.return_std) << ','
        << (ref < 0.0 ? "nan" : num(ref)) << "\n";
  }
}

MatrixReport read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty report file '" + path + "'");
  const MetaLine meta = parse_meta_line(line, "relay-matrix-csv");
  MatrixReport rep;
  rep.schema_version = meta.version;
  if (meta.version != kReportSchemaVersion)
    throw FormatError(strf("unsupported matrix csv schema v%d (expected v%d)", meta.version,
                           kReportSchemaVersion));
  rep.env_id = meta.kv.count("env") ? meta.kv.at("env") : "";
  if (!meta.kv.count("horizon")) throw FormatError("matrix csv metadata lacks horizon");
  rep.horizon = static_cast<int>(parse_num(meta.kv.at("horizon")));
  rep.failure_mode = meta.kv.count("failure_mode") ? meta.kv.at("failure_mode") : "termination";
  rep.return_threshold =
      meta.kv.count("return_threshold") ? parse_num(meta.kv.at("return_threshold")) : 0.0;

  if (!std::getline(in, line)) throw FormatError("matrix csv missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMatrixHeader) throw FormatError("unexpected matrix csv header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw FormatError("matrix csv row with " + std::to_string(f.size()) +
                                          " fields: '" + line + "'");
    MatrixRow r;
    r.test_id = f[0];
    r.stranger_id = f[1];
    r.test_algo = f[2];
    r.stranger_algo = f[3];
    r.n_states = static_cast<int>(parse_num(f[4]));
    r.failure_rate = parse_num(f[5]);
    r.failure_std = parse_num(f[6]);
    r.mean_return = parse_num(f[7]);
    r.return_std = parse_num(f[8]);
    r.reference_rate = parse_num(f[9]);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

void write_per_state_csv(const std::string& path, const RelayMatrix& matrix) {
  auto out = open_out(path);
  out << "# relay-states-csv v" << kReportSchemaVersion << "; horizon=" << matrix.horizon
      << "; failure_mode=" << failure_mode_name(matrix.failure_mode) << "\n";
  out << kStatesHeader << "\n";
  for (const RelayCell& cell : matrix.cells) {
    if (!cell.error.empty()) continue;
    const auto& states = matrix.harvests[cell.stranger_index].states;
    for (size_t i = 0; i < cell.outcomes.size(); ++i) {
      const RelayOutcome& o = cell.outcomes[i];
      if (!o.valid) continue;
      out << matrix.test_ids[cell.test_index] << ',' << matrix.stranger_ids[cell.stranger_index]
          << ',' << i << ',' << states[i].t_index << ',' << (o.failed ? 1 : 0) << ','
          << o.steps_survived << ',' << num(o.q_at_takeover) << ','
          << num(states[i].stranger_remaining_return) << "\n";
    }
  }
}

void write_ordinary_csv(const std::string& path, const std::vector<OrdinaryRow>& rows) {
  auto out = open_out(path);
  out << "# ordinary-eval-csv v" << kReportSchemaVersion << "\n";
  out << kOrdinaryHeader << "\n";
  for (const OrdinaryRow& r : rows) {
    check_id(r.agent_id);
    out << r.agent_id << ',' << r.algorithm_id << ',' << r.n_episodes << ','
        << num(r.mean_return) << ',' << num(r.return_std) << ',' << num(r.failure_rate) << ','
        << num(r.mean_length) << "\n";
  }
}

std::vector<OrdinaryRow> read_ordinary_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty report file '" + path + "'");
  const MetaLine meta = parse_meta_line(line, "ordinary-eval-csv");
  if (meta.version != kReportSchemaVersion)
    throw FormatError("unsupported ordinary csv schema version");
  if (!std::getline(in, line)) throw FormatError("ordinary csv missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kOrdinaryHeader) throw FormatError("unexpected ordinary csv header");
  std::vector<OrdinaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw FormatError("ordinary csv row with wrong field count");
    rows.push_back({f[0], f[1], static_cast<int>(parse_num(f[2])), parse_num(f[3]),
                    parse_num(f[4]), parse_num(f[5]), parse_num(f[6])});
  }
  return rows;
}

namespace {

// Exact pooled mean/std merge from per-cell (n, mean, sample std).
struct PooledStats {
  long long n = 0;
  double mean = 0.0;
  double pair_std = 0.0;   // sample std over the member means
  double state_std = 0.0;  // sample std over the pooled underlying samples
  int n_pairs = 0;
};

PooledStats pool_cells(const std::vector<std::array<double, 3>>& cells /* n, mean, std */) {
  PooledStats p;
  if (cells.empty()) return p;
  p.n_pairs = static_cast<int>(cells.size());
  double mean_sum = 0.0;
  for (const auto& c : cells) {
    p.n += static_cast<long long>(c[0]);
    mean_sum += c[1];
  }
  p.mean = mean_sum / static_cast<double>(cells.size());
  if (cells.size() >= 2) {
    double ss = 0.0;
    for (const auto& c : cells) ss += (c[1] - p.mean) * (c[1] - p.mean);
    p.pair_std = std::sqrt(ss / (static_cast<double>(cells.size()) - 1.0));
  }
  if (p.n >= 2) {
    const double grand = [&] {
      double s = 0.0;
      for (const auto& c : cells) s += c[0] * c[1];
      return s / static_cast<double>(p.n);
    }();
    double ss = 0.0;
    for (const auto& c : cells)
      ss += (c[0] - 1.0) * c[2] * c[2] + c[0] * (c[1] - grand) * (c[1] - grand);
    p.state_std = std::sqrt(ss / (static_cast<double>(p.n) - 1.0));
  }
  return p;
}

std::string cell_text(const PooledStats& p, double scale) {
  if (p.n_pairs == 0) return "-";
  return strf("%.1f +-%.1f +-%.1f", scale * p.mean, scale * p.pair_std, scale * p.state_std);
}

std::string pad(const std::string& s, size_t width) {
  if (s.size() >= width) return s;
  return std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string render_grouped_tables(const std::vector<MatrixReport>& reports,
                                  const std::vector<OrdinaryRow>& ordinary) {
  if (reports.empty()) throw std::invalid_argument("no matrix reports to render");
  const MatrixReport& head = reports.front();
  std::set<std::pair<std::string, std::string>> seen_pairs;
  std::vector<const MatrixRow*> rows;
  for (const MatrixReport& rep : reports) {
    if (rep.schema_version != head.schema_version)
      throw std::invalid_argument("matrix reports mix schema versions");
    if (rep.horizon != head.horizon)
      throw std::invalid_argument(strf("matrix reports mix horizons (%d vs %d)", head.horizon,
                                       rep.horizon));
    if (rep.env_id != head.env_id) throw std::invalid_argument("matrix reports mix envs");
    if (rep.failure_mode != head.failure_mode ||
        rep.return_threshold != head.return_threshold)
      throw std::invalid_argument("matrix reports mix failure definitions");
    for (const MatrixRow& r : rep.rows) {
      if (!seen_pairs.insert({r.test_id, r.stranger_id}).second)
        throw std::invalid_argument("duplicate (test, stranger) pair '" + r.test_id + "', '" +
                                    r.stranger_id + "'");
      rows.push_back(&r);
    }
  }

  std::set<std::string> stranger_algos, test_algos;
  for (const MatrixRow* r : rows) {
    stranger_algos.insert(r->stranger_algo);
    test_algos.insert(r->test_algo);
  }

  auto group_cells = [&rows](const std::string& s_algo, const std::string& t_algo,
                             bool self_pairs, bool returns) {
    std::vector<std::array<double, 3>> cells;
    for (const MatrixRow* r : rows) {
      if (r->stranger_algo != s_algo) continue;
      if (!t_algo.empty() && r->test_algo != t_algo) continue;
      if ((r->test_id == r->stranger_id) != self_pairs) continue;
      if (returns)
        cells.push_back({static_cast<double>(r->n_states), r->mean_return, r->return_std});
      else
        cells.push_back({static_cast<double>(r->n_states), r->failure_rate, r->failure_std});
    }
    return cells;
  };

  const size_t label_w = [&] {
    size_t w = std::string("stranger-algo \\ test-algo").size();
    for (const auto& a : stranger_algos) w = std::max(w, a.size());
    return w + 2;
  }();
  const size_t col_w = 22;

  std::ostringstream out;
  const bool thresh = head.failure_mode != "termination";
  out << "Relay evaluation: env " << head.env_id << ", L = " << head.horizon
      << ", failure = " << head.failure_mode;
  if (thresh) out << " (threshold " << num(head.return_threshold) << ")";
  out << "\n";
  if (thresh)
    out << "note: episodes cannot continue past a termination, so thresholded returns use the "
           "return accumulated up to it\n";
  out << "cells: mean +-across-pair-std +-across-state-std; self-pairs are reported only in the "
         "Reference column\n\n";

  for (int block = 0; block < 2; ++block) {
    const bool returns = block == 1;
    const double scale = returns ? 1.0 : 100.0;
    out << (returns ? "Mean relay return over L steps" : "Relay failure rates (%)") << "\n";
    out << pad("stranger-algo \\ test-algo", label_w);
    for (const auto& t : test_algos) out << " |" << pad(t, col_w);
    out << " |" << pad("Reference", col_w) << "\n";
    out << std::string(label_w + (test_algos.size() + 1) * (col_w + 2), '-') << "\n";
    for (const auto& s : stranger_algos) {
      out << pad(s, label_w);
      for (const auto& t : test_algos)
        out << " |" << pad(cell_text(pool_cells(group_cells(s, t, false, returns)), scale), col_w);
      out << " |"
          << pad(cell_text(pool_cells(group_cells(s, "", true, returns)), scale), col_w)
          << "\n";
    }
    out << "\n";
  }

  if (!ordinary.empty()) {
    out << "Ordinary evaluation (deterministic policy, episodes from d0 resets)\n";
    out << pad("agent_id", 18) << pad("algo", 8) << pad("episodes", 10)
        << pad("mean_return", 14) << pad("+-std", 10) << pad("failure%", 10)
        << pad("mean_len", 10) << "\n";
    for (const OrdinaryRow& r : ordinary) {
      out << pad(r.agent_id, 18) << pad(r.algorithm_id, 8) << pad(std::to_string(r.n_episodes), 10)
          << pad(strf("%.1f", r.mean_return), 14) << pad(strf("%.1f", r.return_std), 10)
          << pad(strf("%.1f", 100.0 * r.failure_rate), 10)
          << pad(strf("%.1f", r.mean_length), 10) << "\n";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace relaygen
