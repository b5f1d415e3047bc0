#pragma once

#include <string>

#include "fedal/core_model.hpp"
#include "fedal/problem_library.hpp"

namespace fedal {

/// JSON document {"dimension", "clients", "constraints_per_block", "seed",
/// "A": [n matrices], "b": [n vectors], "C": [n+1 matrices], "d": [n+1 vectors]},
/// matrices as arrays of rows. Doubles are written with round-trip precision.
void write_lcqp(const std::string& path, const LcqpInstance& inst);
LcqpInstance read_lcqp(const std::string& path);

/// A primal-dual pair {"w": [...], "mu": [[block 0], ..., [block n]]}.
struct SolutionFile {
  Vec w;
  MultiplierState mu;
};

void write_solution(const std::string& path, const Vec& w, const MultiplierState& mu);
SolutionFile read_solution(const std::string& path);

}  // namespace fedal
