#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "mpgdrive/tabular_game.hpp"

namespace mpgdrive::tabular {

/// A tabular game as stored on disk, with an optional explicit potential.
///
/// The format is whitespace-separated text introduced by the magic line
/// `mpg-tabular-game 1`. Keywords follow in any order after `agents` and
/// `actions`; `#` starts a comment running to the end of the line. Every
/// tensor is flattened row-major with the last index varying fastest:
///
///   agents N
///   actions A_0 .. A_{N-1}
///   local_states L_0 .. L_{N-1}      (or `local_states none`)
///   states S
///   gamma g
///   rho        S values
///   transition S * A * S values      [s][joint a][s']
///   reward i   S * A values          one block per agent
///   alpha x                          optional
///   beta       N * N values          optional
///   self i     L_i * A_i values      optional, [s_i][a_i]
///   pair i j   L_i * L_j * A_i * A_j optional, [s_i][s_j][a_i][a_j]
///   potential  S * A values          optional
///   end
///
/// Joint indices are row-major over agents with agent 0 most significant.
struct GameFile {
  TabularGame game;
  std::optional<StatePotential> potential;
};

/// Throws FormatError with the offending keyword on malformed input.
GameFile read_game(std::istream& in);
GameFile read_game_file(const std::string& path);

void write_game(std::ostream& out, const TabularGame& game,
                const std::optional<StatePotential>& potential = std::nullopt);

}  // namespace mpgdrive::tabular
