#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace uavsec {

/// Jain index 1 / (n * sum_i (x_i / sum_j x_j)^2). A zero total returns 1/n
/// so the fairness indicator starts unlatched.
double jain_index(std::span<const double> cum_bits);

/// Latched fairness indicator: true once the previous Jain index reached k_f.
bool update_indicator(bool prev_latched, double prev_jain, double k_f);

/// 1 when latched, else 2 / (1 + exp((cum - r_max) * k_gp)) - 1.
double fairness_factor(double cum_mbit, bool latched, double r_max_mbit, double k_gp);

/// argmax_u factor[u] * rate[u]; exact ties go to the lowest cumulative
/// throughput, then the lowest index. Returns a position into the spans.
std::size_t schedule(std::span<const double> fairness_factors, std::span<const double> secrecy_rates,
                     std::span<const double> cum_bits);

/// Sum over clusters of factor * rate * dt for the selected users.
double instantaneous_fst(std::span<const double> selected_factors,
                         std::span<const double> selected_rates, double dt);

double total_fst(std::span<const double> instantaneous);

/// Per-episode cumulative secrecy throughput and fairness state. Users are
/// addressed by their position inside the cluster.
class ThroughputLedger {
 public:
  explicit ThroughputLedger(const std::vector<std::size_t>& cluster_sizes);

  std::size_t cluster_count() const { return per_user_cum_bits_.size(); }
  std::size_t cluster_size(std::size_t c) const { return per_user_cum_bits_[c].size(); }

  /// Refresh every latch from the previous slot's Jain index.
  void begin_slot(double k_f);

  /// Slot-start fairness factors of a cluster.
  std::vector<double> factors(std::size_t cluster, double r_max_mbit, double k_gp) const;

  void accrue(std::size_t cluster, std::size_t user, double secrecy_rate_bps, double dt);

  /// Recompute Jain indices after this slot's accruals.
  void end_slot();

  std::span<const double> user_cum_bits(std::size_t c) const { return per_user_cum_bits_[c]; }
  double cluster_cum_bits(std::size_t c) const { return per_cluster_cum_bits_[c]; }
  bool latched(std::size_t c) const { return fairness_latched_[c] != 0; }
  double jain(std::size_t c) const { return jain_per_cluster_[c]; }

 private:
  std::vector<std::vector<double>> per_user_cum_bits_;
  std::vector<double> per_cluster_cum_bits_;
  std::vector<char> fairness_latched_;
  std::vector<double> jain_per_cluster_;
};

}  // namespace uavsec
