#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ghlda {

// Dirichlet-multinomial sufficient statistics with symmetric prior eta.
class DirMultStats {
 public:
  DirMultStats(int vocab_size, double eta)
      : eta_(eta), counts_(vocab_size, 0) {
    if (vocab_size <= 0) throw std::invalid_argument("DirMultStats: empty vocabulary");
    if (eta <= 0.0) throw std::invalid_argument("DirMultStats: eta must be positive");
  }

  void add_word(int v) {
    counts_[v] += 1;
    total_ += 1;
  }
  void remove_word(int v) {
    if (counts_[v] < 1) throw std::logic_error("DirMultStats: removing absent word");
    counts_[v] -= 1;
    total_ -= 1;
  }

  double log_predictive(int v) const {
    const double vsize = static_cast<double>(counts_.size());
    return std::log(eta_ + counts_[v]) - std::log(vsize * eta_ + total_);
  }

  // log probability of adding the multiset `words` to the current counts.
  double log_marginal_set(const std::vector<int>& words) const {
    if (words.empty()) return 0.0;
    std::vector<int> extra(counts_.size(), 0);
    for (int v : words) extra[v] += 1;
    const double vsize = static_cast<double>(counts_.size());
    double r = std::lgamma(vsize * eta_ + total_) -
               std::lgamma(vsize * eta_ + total_ + words.size());
    for (std::size_t v = 0; v < counts_.size(); ++v) {
      if (extra[v] > 0) {
        r += std::lgamma(eta_ + counts_[v] + extra[v]) - std::lgamma(eta_ + counts_[v]);
      }
    }
    return r;
  }

  int count(int v) const { return counts_[v]; }
  int total() const { return total_; }
  int vocab_size() const { return static_cast<int>(counts_.size()); }
  double eta() const { return eta_; }

 private:
  double eta_;
  std::vector<int> counts_;
  int total_ = 0;
};

}  // namespace ghlda
