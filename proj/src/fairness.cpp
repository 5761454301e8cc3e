#include "uavsec/fairness.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uavsec {

double jain_index(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("jain_index: empty list");
  const double n = static_cast<double>(x.size());
  double total = 0.0, sum_sq = 0.0;
  for (double v : x) {
    total += v;
    sum_sq += v * v;
  }
  if (total <= 0.0) return 1.0 / n;
  return (total * total) / (n * sum_sq);
}

bool update_indicator(bool prev_latched, double prev_jain, double k_f) {
  return prev_latched || prev_jain >= k_f;
}

double fairness_factor(double cum_mbit, bool latched, double r_max_mbit, double k_gp) {
  if (!(k_gp > 0.0)) throw std::invalid_argument("fairness_factor: k_gp must be > 0");
  if (latched) return 1.0;
  return 2.0 / (1.0 + std::exp((cum_mbit - r_max_mbit) * k_gp)) - 1.0;
}

std::size_t schedule(std::span<const double> factors, std::span<const double> rates,
                     std::span<const double> cum) {
  if (factors.empty() || factors.size() != rates.size() || cum.size() != rates.size())
    throw std::invalid_argument("schedule: empty or mismatched cluster");
  std::size_t best = 0;
  double best_score = factors[0] * rates[0];
  for (std::size_t u = 1; u < rates.size(); ++u) {
    const double score = factors[u] * rates[u];
    if (score > best_score || (score == best_score && cum[u] < cum[best])) {
      best = u;
      best_score = score;
    }
  }
  return best;
}

double instantaneous_fst(std::span<const double> factors, std::span<const double> rates, double dt) {
  if (factors.size() != rates.size()) throw std::invalid_argument("instantaneous_fst: size mismatch");
  double sum = 0.0;
  for (std::size_t m = 0; m < rates.size(); ++m) sum += factors[m] * rates[m] * dt;
  return sum;
}

double total_fst(std::span<const double> instantaneous) {
  return std::accumulate(instantaneous.begin(), instantaneous.end(), 0.0);
}

ThroughputLedger::ThroughputLedger(const std::vector<std::size_t>& sizes) {
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("ThroughputLedger: empty cluster");
    per_user_cum_bits_.emplace_back(s, 0.0);
    jain_per_cluster_.push_back(1.0 / static_cast<double>(s));
  }
  per_cluster_cum_bits_.assign(sizes.size(), 0.0);
  fairness_latched_.assign(sizes.size(), 0);
}

void ThroughputLedger::begin_slot(double k_f) {
  for (std::size_t c = 0; c < cluster_count(); ++c)
    fairness_latched_[c] = update_indicator(latched(c), jain_per_cluster_[c], k_f) ? 1 : 0;
}

std::vector<double> ThroughputLedger::factors(std::size_t cluster, double r_max_mbit,
                                              double k_gp) const {
  std::vector<double> f;
  f.reserve(cluster_size(cluster));
  for (double bits : per_user_cum_bits_[cluster])
    f.push_back(fairness_factor(bits * 1e-6, latched(cluster), r_max_mbit, k_gp));
  return f;
}

void ThroughputLedger::accrue(std::size_t cluster, std::size_t user, double rate, double dt) {
  const double bits = rate * dt;
  per_user_cum_bits_.at(cluster).at(user) += bits;
  per_cluster_cum_bits_[cluster] += bits;
}

void ThroughputLedger::end_slot() {
  for (std::size_t c = 0; c < cluster_count(); ++c)
    jain_per_cluster_[c] = jain_index(per_user_cum_bits_[c]);
}

}  // namespace uavsec
