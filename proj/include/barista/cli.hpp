#ifndef BARISTA_CLI_HPP
#define BARISTA_CLI_HPP

#include <iosfwd>

namespace barista {

inline constexpr const char* kSchema = "barista/1";

/**
 * Entry point of the barista command:
 *
 *   barista simulate | fit | select | diagnose | ingest-check [flags]
 *
 * Reports go to --output or, without it, to `out`. Failures print a JSON
 * error object to `err`. Returns 0 on success, 2 for usage errors and 1
 * for everything else.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace barista

#endif  // BARISTA_CLI_HPP
