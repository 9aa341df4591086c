#ifndef BARISTA_SAMPLE_HPP
#define BARISTA_SAMPLE_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace barista {

/**
 * Event times on [0, T), sorted ascending, with an optional auction id per
 * event. Times equal to T are not representable: the log-likelihood contains
 * ln(1 - x/T).
 */
class BidSample {
 public:
  BidSample() = default;

  /// Validates and stably sorts; ties keep their input order.
  BidSample(std::vector<double> times, double horizon,
            std::vector<std::string> sources = {})
      : times_(std::move(times)),
        horizon_(horizon),
        sources_(std::move(sources)) {
    if (!(horizon_ > 0)) throw std::invalid_argument("BidSample: horizon must be positive");
    if (!sources_.empty() && sources_.size() != times_.size())
      throw std::invalid_argument("BidSample: one source per event required");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!(times_[i] >= 0 && times_[i] < horizon_)) {
        std::ostringstream os;
        os << "BidSample: event " << i << " at " << times_[i]
           << " outside [0, " << horizon_ << ")";
        throw std::invalid_argument(os.str());
      }
    }
    if (!std::is_sorted(times_.begin(), times_.end())) {
      std::vector<std::size_t> order(times_.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
        return times_[a] < times_[b];
      });
      std::vector<double> t(times_.size());
      std::vector<std::string> s(sources_.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        t[i] = times_[order[i]];
        if (!sources_.empty()) s[i] = std::move(sources_[order[i]]);
      }
      times_ = std::move(t);
      sources_ = std::move(s);
    }
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::string>& sources() const { return sources_; }
  double horizon() const { return horizon_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double operator[](std::size_t i) const { return times_[i]; }

 private:
  std::vector<double> times_;
  double horizon_ = 1;
  std::vector<std::string> sources_;
};

}  // namespace barista

#endif  // BARISTA_SAMPLE_HPP
