#include "barista/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace barista {

TimeUnit parse_unit(std::string_view name) {
  if (name == "days") return TimeUnit::Days;
  if (name == "hours") return TimeUnit::Hours;
  if (name == "minutes") return TimeUnit::Minutes;
  if (name == "seconds") return TimeUnit::Seconds;
  throw std::invalid_argument("unknown unit '" + std::string(name) + "'");
}

const char* unit_name(TimeUnit u) {
  switch (u) {
    case TimeUnit::Days: return "days";
    case TimeUnit::Hours: return "hours";
    case TimeUnit::Minutes: return "minutes";
    case TimeUnit::Seconds: return "seconds";
  }
  return "";
}

double seconds_per(TimeUnit u) {
  switch (u) {
    case TimeUnit::Days: return 86400;
    case TimeUnit::Hours: return 3600;
    case TimeUnit::Minutes: return 60;
    case TimeUnit::Seconds: return 1;
  }
  return 1;
}

ClampPolicy parse_clamp_policy(std::string_view name) {
  if (name == "reject") return ClampPolicy::Reject;
  if (name == "clamp-epsilon") return ClampPolicy::ClampEpsilon;
  throw std::invalid_argument("unknown clamp policy '" + std::string(name) + "'");
}

const char* clamp_policy_name(ClampPolicy p) {
  return p == ClampPolicy::Reject ? "reject" : "clamp-epsilon";
}

namespace {

std::string summarize(const std::vector<RowError>& rows) {
  std::ostringstream os;
  os << "ingest failed";
  if (!rows.empty()) {
    os << ": ";
    if (rows.front().line > 0) os << "line " << rows.front().line << ": ";
    os << rows.front().message;
    if (rows.size() > 1) os << " (and " << rows.size() - 1 << " more)";
  }
  return os.str();
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Seconds since the epoch for "YYYY-MM-DD[T ]HH:MM:SS[.frac][Z]".
std::optional<double> parse_timestamp(std::string_view s) {
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  std::string text(s);
  if (text.size() > 10 && text[10] == 'T') text[10] = ' ';
  double frac = 0;
  if (const auto dot = text.find('.'); dot != std::string::npos) {
    const auto f = parse_number("0" + text.substr(dot));
    if (!f) return std::nullopt;
    frac = *f;
    text.resize(dot);
  }
  if (text.size() != 19) return std::nullopt;  // get_time accepts a bare date
  std::tm tm{};
  std::istringstream is(text);
  is >> std::get_time(&tm, "%Y-%m-%d %H:%M:%S");
  if (is.fail() || is.peek() != std::char_traits<char>::eof()) return std::nullopt;
  return double(timegm(&tm)) + frac;
}

struct Columns {
  int id = -1, time = -1, stamp = -1, start = -1, horizon = -1;
};

}  // namespace

IngestError::IngestError(std::vector<RowError> rows)
    : std::runtime_error(summarize(rows)), rows_(std::move(rows)) {}

Ingested ingest(const IngestSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw IngestError({{0, "cannot open '" + spec.path + "'"}});
  return ingest(in, spec);
}

Ingested ingest(std::istream& in, const IngestSpec& spec) {
  Ingested out;
  std::vector<RowError> errors;
  std::string line;
  std::size_t lineno = 0;
  std::optional<Columns> cols;

  struct Row {
    std::size_t line;
    std::string id;
    double time;
    bool seconds;  // ISO timestamps differ in seconds, not in the unit
    std::optional<double> horizon;
  };
  std::vector<Row> rows;
  bool absolute = false;
  std::optional<bool> iso;  // decided by the first good absolute row

  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (cols) continue;
      const auto body = trim(text.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos)
        out.metadata.emplace_back(std::string(trim(body.substr(0, eq))),
                                  std::string(trim(body.substr(eq + 1))));
      continue;
    }
    const auto fields = split(text);
    if (!cols) {
      Columns c;
      for (std::size_t j = 0; j < fields.size(); ++j) {
        const int k = int(j);
        if (fields[j] == "auction_id") c.id = k;
        else if (fields[j] == "bid_time") c.time = k;
        else if (fields[j] == "bid_timestamp") c.stamp = k;
        else if (fields[j] == "auction_start") c.start = k;
        else if (fields[j] == "horizon") c.horizon = k;
      }
      if (c.id < 0)
        throw IngestError({{lineno, "header lacks an auction_id column"}});
      if (c.time < 0 && (c.stamp < 0 || c.start < 0))
        throw IngestError({{lineno, "header needs bid_time, or bid_timestamp with auction_start"}});
      absolute = c.time < 0;
      cols = c;
      continue;
    }
    const auto& c = *cols;
    const int need = std::max({c.id, c.time, c.stamp, c.start, c.horizon});
    if (int(fields.size()) <= need) {
      errors.push_back({lineno, "expected at least " + std::to_string(need + 1) + " fields"});
      continue;
    }
    Row r{lineno, std::string(fields[c.id]), 0, false, std::nullopt};
    if (r.id.empty()) {
      errors.push_back({lineno, "empty auction_id"});
      continue;
    }
    if (!absolute) {
      const auto t = parse_number(fields[c.time]);
      if (!t) {
        errors.push_back({lineno, "unparseable bid_time '" + std::string(fields[c.time]) + "'"});
        continue;
      }
      r.time = *t;
    } else {
      auto a = parse_number(fields[c.stamp]);
      auto b = parse_number(fields[c.start]);
      const bool row_iso = !a || !b;
      if (row_iso) {
        a = parse_timestamp(fields[c.stamp]);
        b = parse_timestamp(fields[c.start]);
      }
      if (!a || !b) {
        errors.push_back({lineno, "unparseable bid_timestamp or auction_start"});
        continue;
      }
      if (!iso) iso = row_iso;
      if (row_iso != *iso) {
        errors.push_back({lineno, "mixes numeric and ISO-8601 times"});
        continue;
      }
      r.time = *a - *b;
      r.seconds = row_iso;
    }
    if (c.horizon >= 0) {
      const auto h = parse_number(fields[c.horizon]);
      if (!h || !(*h > 0)) {
        errors.push_back({lineno, "horizon must be a positive number"});
        continue;
      }
      r.horizon = h;
    }
    rows.push_back(std::move(r));
  }
  if (!cols) throw IngestError({{0, "no header line"}});

  auto meta = [&](const std::string& key) -> std::optional<std::string> {
    for (const auto& [k, v] : out.metadata)
      if (k == key) return v;
    return std::nullopt;
  };

  std::optional<TimeUnit> unit = spec.unit;
  if (!unit) {
    if (const auto m = meta("unit")) {
      try {
        unit = parse_unit(*m);
      } catch (const std::invalid_argument& e) {
        throw IngestError({{0, std::string("metadata: ") + e.what()}});
      }
    }
  }
  if (!unit) throw IngestError({{0, "time unit not declared (flag or '# unit=' metadata)"}});
  out.unit = *unit;

  // Horizon: explicit, then metadata, then the per-auction column, which
  // must agree throughout.
  std::optional<double> T = spec.horizon;
  if (!T) {
    if (const auto m = meta("horizon")) {
      T = parse_number(*m);
      if (!T) throw IngestError({{0, "metadata: unparseable horizon '" + *m + "'"}});
    }
  }
  std::map<double, std::string> seen;
  for (const auto& r : rows)
    if (r.horizon) seen.emplace(*r.horizon, r.id);
  if (T) seen.emplace(*T, "");
  if (seen.size() > 1) {
    std::ostringstream os;
    os << "mixed horizons";
    const char* sep = " ";
    for (const auto& [h, id] : seen) {
      os << sep << format_double(h);
      if (!id.empty()) os << " (auction " << id << ")";
      sep = ", ";
    }
    os << "; auctions of different durations cannot be pooled";
    throw IngestError({{0, os.str()}});
  }
  if (!T && !seen.empty()) T = seen.begin()->first;
  if (!T) throw IngestError({{0, "horizon not given (flag, '# horizon=' metadata or a horizon column)"}});
  if (!(*T > 0)) throw IngestError({{0, "horizon must be positive"}});

  std::vector<double> times;
  std::vector<std::string> sources;
  times.reserve(rows.size());
  sources.reserve(rows.size());
  for (auto& r : rows) {
    double t = r.time;
    if (r.seconds) t /= seconds_per(*unit);
    if (!(t >= 0 && t < *T)) {
      if (spec.clamp_policy == ClampPolicy::Reject) {
        errors.push_back({r.line, "time " + format_double(t) + " outside [0, " + format_double(*T) + ")"});
        continue;
      }
      t = t < 0 ? 0.0 : *T * (1 - kClampEpsilon);
      ++out.clamped;
    }
    times.push_back(t);
    sources.push_back(std::move(r.id));
  }
  if (!errors.empty()) {
    std::stable_sort(errors.begin(), errors.end(),
                     [](const RowError& x, const RowError& y) { return x.line < y.line; });
    throw IngestError(std::move(errors));
  }

  out.rows = times.size();
  out.sample = BidSample(std::move(times), *T, std::move(sources));
  std::map<std::string, std::size_t> index;
  const auto& ts = out.sample.times();
  const auto& ids = out.sample.sources();
  // by first appearance in time order after pooling
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto [it, fresh] = index.emplace(ids[i], out.auctions.size());
    if (fresh) out.auctions.push_back({ids[i], 0, ts[i], ts[i]});
    auto& a = out.auctions[it->second];
    ++a.count;
    a.last = ts[i];
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

void write_sample_csv(std::ostream& out, const BidSample& sample,
                      const std::vector<std::pair<std::string, std::string>>& metadata) {
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out << "auction_id,bid_time\n";
  const auto& src = sample.sources();
  for (std::size_t i = 0; i < sample.size(); ++i)
    out << (src.empty() ? std::string("sim") : src[i]) << ',' << format_double(sample[i]) << '\n';
}

void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
    out << '\n';
  }
}

}  // namespace barista
