#ifndef BARISTA_IO_HPP
#define BARISTA_IO_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "barista/sample.hpp"

namespace barista {

enum class TimeUnit { Days, Hours, Minutes, Seconds };

/// "days", "hours", "minutes" or "seconds"; throws std::invalid_argument.
TimeUnit parse_unit(std::string_view name);
const char* unit_name(TimeUnit u);
double seconds_per(TimeUnit u);
inline double minutes_per(TimeUnit u) { return seconds_per(u) / 60; }

/// What to do with a time outside [0, T).
enum class ClampPolicy { Reject, ClampEpsilon };

ClampPolicy parse_clamp_policy(std::string_view name);
const char* clamp_policy_name(ClampPolicy p);

/// Times >= T are moved to T (1 - kClampEpsilon) under ClampEpsilon.
inline constexpr double kClampEpsilon = 1e-9;

/**
 * A CSV of bids, one per row, pooled across auctions. Columns (any order,
 * header required):
 *   auction_id, bid_time                      offset from the auction start
 *   auction_id, bid_timestamp, auction_start  absolute times
 * and optionally horizon. Times are numbers in the declared unit, or
 * ISO-8601 UTC timestamps ("2004-05-01T12:00:00Z") for the absolute layout.
 * Lines "# key=value" before the header are metadata; horizon and unit are
 * taken from there when the IngestSpec leaves them unset.
 */
struct IngestSpec {
  std::string path;
  std::optional<double> horizon;
  std::optional<TimeUnit> unit;
  ClampPolicy clamp_policy = ClampPolicy::Reject;
};

struct RowError {
  std::size_t line = 0;  // 1-based; 0 for file-level problems
  std::string message;
};

class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<RowError> rows);
  const std::vector<RowError>& rows() const { return rows_; }

 private:
  std::vector<RowError> rows_;
};

struct AuctionSummary {
  std::string id;
  std::size_t count = 0;
  double first = 0, last = 0;
};

struct Ingested {
  BidSample sample;  // sources hold the auction ids
  TimeUnit unit = TimeUnit::Days;
  std::vector<AuctionSummary> auctions;  // by first appearance
  std::size_t rows = 0;
  std::size_t clamped = 0;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Throws IngestError listing every bad row, or a file-level problem.
Ingested ingest(const IngestSpec& spec);
Ingested ingest(std::istream& in, const IngestSpec& spec);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

/// Metadata lines, the header auction_id,bid_time, then one row per event.
/// Events without a source get auction id "sim".
void write_sample_csv(std::ostream& out, const BidSample& sample,
                      const std::vector<std::pair<std::string, std::string>>& metadata);

/// Writes comma-separated rows under a header line.
void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

}  // namespace barista

#endif  // BARISTA_IO_HPP
