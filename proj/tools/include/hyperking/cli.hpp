#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hyperking::cli {

struct CommandOutcome {
  int status = 0;
  std::vector<std::string> artifacts;  // paths written
  std::string summary;                 // one-line JSON printed on success
};

/// Parses and runs one subcommand. args excludes the program name. The
/// summary goes to `out`; usage text and error messages go to `err`.
CommandOutcome run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct GradcheckReport {
  std::string target;
  std::size_t configs = 0;
  double shift_max_deviation = 0.0;    // tape vs parameter shift, circuit angles
  double circuit_fd_max_deviation = 0.0;  // tape vs finite differences, circuit angles and features
  double network_fd_max_deviation = 0.0;  // tape vs finite differences, network parameters and input
};

/// Three-way gradient comparison on random configurations of the mini
/// generator quantum core or the mini discriminator.
GradcheckReport gradcheck(const std::string& target, const std::string& preset, std::size_t configs,
                          std::uint64_t seed);

/// Minimal SVG line charts of a curves.csv file.
std::string curves_svg(const std::string& csv_text);

}  // namespace hyperking::cli
