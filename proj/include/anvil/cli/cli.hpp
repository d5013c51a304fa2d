#pragma once

// spec-anvil command surface:
//   corpus validate [CORPUS_JSON] [--config FILE]
//   run DEFECT --mode blind|enlightened --config FILE [--campaign-id ID]
//   campaign --config FILE [--composite] [--workers N] [--campaign-id ID]
//   verify-spec DEFECT FEATURE BINDINGS (--config FILE | --corpus FILE) [--negative-only]
//   report (--replay OUTCOMES | --run DIR) [--costs FILE] [--format markdown|csv]
//          [--include-degraded] [--output FILE]

#include <ostream>

#include "anvil/pipeline.hpp"
#include "anvil/rqa.hpp"

namespace anvil::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFindings = 1;
inline constexpr int kUsage = 2;
inline constexpr int kPlausibleOnly = 3;
inline constexpr int kNoFix = 4;
inline constexpr int kSessionError = 5;
inline constexpr int kSpecTooWeak = 10;
inline constexpr int kSpecMisaligned = 11;
inline constexpr int kHarnessError = 12;
inline constexpr int kSpecParseError = 13;
inline constexpr int kManifestError = 14;
inline constexpr int kBindingError = 15;
inline constexpr int kInfrastructure = 70;
}  // namespace exit_code

int exit_code_for(pipeline::Outcome o);
int exit_code_for(rqa::VerdictKind k);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace anvil::cli
