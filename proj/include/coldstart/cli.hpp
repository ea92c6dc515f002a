#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coldstart {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Entry point behind the `coldstart` executable. Subcommands: ingest, synth,
// index, run, ablate, analyze, report. Returns 0 on success, 1 on usage or
// validation errors, 2 on I/O errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Same, with argv[0] supplied.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coldstart
