#include "mpgdrive/game_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mpgdrive/errors.hpp"

namespace mpgdrive::tabular {

namespace {

class Tokens {
 public:
  explicit Tokens(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back(std::move(tok));
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  std::string word(const std::string& context) {
    if (done()) throw FormatError("unexpected end of input while reading " + context);
    return tokens_[pos_++];
  }

  double number(const std::string& context) {
    const std::string tok = word(context);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw FormatError("expected a number in " + context + ", got '" + tok + "'");
    }
  }

  int integer(const std::string& context) {
    const double v = number(context);
    if (v != static_cast<int>(v)) throw FormatError("expected an integer in " + context);
    return static_cast<int>(v);
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

Eigen::MatrixXd read_matrix(Tokens& t, int rows, int cols, const std::string& context) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = t.number(context);
  return m;
}

int agent_index(Tokens& t, const TabularGame& g, const std::string& context) {
  const int i = t.integer(context);
  if (i < 0 || i >= g.n_agents) throw FormatError(context + ": agent index out of range");
  return i;
}

void write_values(std::ostream& out, const double* data, std::size_t count, std::size_t per_line) {
  for (std::size_t k = 0; k < count; ++k) {
    out << data[k] << ((k + 1) % per_line == 0 || k + 1 == count ? '\n' : ' ');
  }
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out << m(r, c) << (c + 1 == m.cols() ? '\n' : ' ');
  }
}

}  // namespace

GameFile read_game(std::istream& in) {
  Tokens t(in);
  if (t.word("header") != "mpg-tabular-game") throw FormatError("missing 'mpg-tabular-game' header");
  if (t.integer("version") != 1) throw FormatError("unsupported game file version");

  GameFile file;
  TabularGame& g = file.game;
  bool have_transition = false;
  bool ended = false;
  std::vector<bool> have_reward;
  while (!t.done()) {
    const std::string key = t.word("keyword");
    if (key == "end") {
      ended = true;
      break;
    }
    if (key == "agents") {
      g.n_agents = t.integer("agents");
      if (g.n_agents < 1) throw FormatError("agents must be positive");
      have_reward.assign(g.n_agents, false);
      g.rewards.assign(g.n_agents, {});
      continue;
    }
    if (g.n_agents < 1) throw FormatError("'agents' must come before '" + key + "'");
    if (key == "actions") {
      g.actions.clear();
      for (int i = 0; i < g.n_agents; ++i) g.actions.push_back(t.integer("actions"));
    } else if (key == "local_states") {
      g.local_states.clear();
      const std::string first = t.word("local_states");
      if (first != "none") {
        std::istringstream one(first);
        g.local_states.push_back(Tokens(one).integer("local_states"));
        for (int i = 1; i < g.n_agents; ++i) g.local_states.push_back(t.integer("local_states"));
      }
    } else if (key == "states") {
      g.states = t.integer("states");
    } else if (key == "gamma") {
      g.gamma = t.number("gamma");
    } else if (key == "rho") {
      g.rho = read_matrix(t, g.states, 1, "rho");
    } else if (key == "transition") {
      if (g.actions.empty() || g.states < 1) throw FormatError("'transition' needs 'actions' and 'states' first");
      const std::size_t count = static_cast<std::size_t>(g.states) * g.joint_actions() * g.states;
      g.transition.resize(count);
      for (auto& p : g.transition) p = t.number("transition");
      have_transition = true;
    } else if (key == "reward") {
      const int i = agent_index(t, g, "reward");
      g.rewards[i] = read_matrix(t, g.states, g.joint_actions(), "reward");
      have_reward[i] = true;
    } else if (key == "alpha") {
      g.structure.alpha = t.number("alpha");
    } else if (key == "beta") {
      g.structure.beta = read_matrix(t, g.n_agents, g.n_agents, "beta");
    } else if (key == "self") {
      if (g.local_states.empty()) throw FormatError("'self' requires local_states");
      const int i = agent_index(t, g, "self");
      if (g.structure.self.empty()) g.structure.self.assign(g.n_agents, {});
      g.structure.self[i] = read_matrix(t, g.local_states[i], g.actions[i], "self");
    } else if (key == "pair") {
      if (g.local_states.empty()) throw FormatError("'pair' requires local_states");
      const int i = agent_index(t, g, "pair");
      const int j = agent_index(t, g, "pair");
      if (i == j) throw FormatError("pair: agents must differ");
      auto& pair = g.structure.pair;
      if (pair.empty()) pair.assign(g.n_agents, std::vector<std::vector<double>>(g.n_agents));
      pair[i][j].resize(static_cast<std::size_t>(g.local_states[i]) * g.local_states[j] * g.actions[i] *
                        g.actions[j]);
      for (auto& v : pair[i][j]) v = t.number("pair");
    } else if (key == "potential") {
      file.potential = read_matrix(t, g.states, g.joint_actions(), "potential");
    } else {
      throw FormatError("unknown keyword '" + key + "'");
    }
  }
  if (!ended) throw FormatError("missing 'end'");
  if (!have_transition) throw FormatError("missing 'transition'");
  for (int i = 0; i < g.n_agents; ++i) {
    if (!have_reward[i]) throw FormatError("missing reward for agent " + std::to_string(i));
  }
  try {
    g.validate();
  } catch (const StructureError& e) {
    throw FormatError(std::string("invalid game: ") + e.what());
  }
  return file;
}

GameFile read_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open game file '" + path + "'");
  return read_game(in);
}

void write_game(std::ostream& out, const TabularGame& g, const std::optional<StatePotential>& potential) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "mpg-tabular-game 1\n";
  out << "agents " << g.n_agents << "\nactions";
  for (int a : g.actions) out << ' ' << a;
  out << "\nlocal_states";
  if (g.local_states.empty()) out << " none";
  for (int l : g.local_states) out << ' ' << l;
  out << "\nstates " << g.states << "\ngamma " << g.gamma << "\nrho\n";
  write_values(out, g.rho.data(), g.rho.size(), g.rho.size());
  out << "transition\n";
  write_values(out, g.transition.data(), g.transition.size(), g.states);
  for (int i = 0; i < g.n_agents; ++i) {
    out << "reward " << i << '\n';
    write_matrix(out, g.rewards[i]);
  }
  const auto& st = g.structure;
  if (st.has_self() || st.has_pair()) out << "alpha " << st.alpha << '\n';
  if (st.beta.size()) {
    out << "beta\n";
    write_matrix(out, st.beta);
  }
  for (int i = 0; i < static_cast<int>(st.self.size()); ++i) {
    if (st.self[i].size() == 0) continue;
    out << "self " << i << '\n';
    write_matrix(out, st.self[i]);
  }
  for (int i = 0; i < static_cast<int>(st.pair.size()); ++i) {
    for (int j = 0; j < static_cast<int>(st.pair[i].size()); ++j) {
      if (i == j || st.pair[i][j].empty()) continue;
      out << "pair " << i << ' ' << j << '\n';
      write_values(out, st.pair[i][j].data(), st.pair[i][j].size(), static_cast<std::size_t>(g.actions[j]));
    }
  }
  if (potential) {
    out << "potential\n";
    write_matrix(out, *potential);
  }
  out << "end\n";
  out.precision(old_precision);
}

}  // namespace mpgdrive::tabular
