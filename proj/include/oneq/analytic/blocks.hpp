#pragma once

// Closed-form success models for protocols made of K blocks of operations.
//
// Two readings of a K-block protocol are exposed:
//   p_succ_sequence: first success among K (re)tries, sum_i p_i prod_{l<i}(1 - p_l)
//   p_all_blocks:    every block must succeed, prod_i p_i

#include <oneq/errors.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oneq::analytic {

namespace detail {
inline void check_prob(double p, const char* who) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(std::string(who) + ": probability " + std::to_string(p) + " outside [0, 1]");
    }
}
}  // namespace detail

/// Success probability of one block with independent quantum and classical failures.
inline double p_block(double p_err_q, double p_err_c) {
    detail::check_prob(p_err_q, "p_block");
    detail::check_prob(p_err_c, "p_block");
    return (1.0 - p_err_q) * (1.0 - p_err_c);
}

/// Evaluates the sum literally; equals 1 - prod(1 - p_i).
inline double p_succ_sequence(std::span<const double> p_succ) {
    if (p_succ.empty()) throw DomainError("p_succ_sequence: empty block list");
    double total = 0.0;
    double all_failed_so_far = 1.0;
    for (double p : p_succ) {
        detail::check_prob(p, "p_succ_sequence");
        total += p * all_failed_so_far;
        all_failed_so_far *= (1.0 - p);
    }
    return total;
}

inline double p_all_blocks(std::span<const double> p_succ) {
    if (p_succ.empty()) throw DomainError("p_all_blocks: empty block list");
    double prod = 1.0;
    for (double p : p_succ) {
        detail::check_prob(p, "p_all_blocks");
        prod *= p;
    }
    return prod;
}

inline double p_succ_iid(double p_err_q, double p_err_c, std::uint64_t k) {
    if (k < 1) throw DomainError("p_succ_iid: K must be at least 1");
    detail::check_prob(p_err_q, "p_succ_iid");
    detail::check_prob(p_err_c, "p_succ_iid");
    const double fail = (1.0 - p_err_c) * p_err_q + p_err_c;
    return 1.0 - std::pow(fail, static_cast<double>(k));
}

/// P[X >= k] for X ~ Binomial(n, p), summed in log space.
inline double binomial_tail(std::uint64_t n, std::uint64_t k, double p) {
    detail::check_prob(p, "binomial_tail");
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    double sum = 0.0;
    for (std::uint64_t i = k; i <= n; ++i) {
        const double di = static_cast<double>(i);
        const double lc = lgn - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0);
        sum += std::exp(lc + di * lp + static_cast<double>(n - i) * lq);
    }
    return std::min(1.0, sum);
}

/// Probability that at least k_target of n_delivered pairs are both received and measured
/// in matching bases: P[Binomial(N, p_deliver / 2) >= K].
inline double qkd_match_success(std::uint64_t n_delivered, std::uint64_t k_target, double p_deliver) {
    detail::check_prob(p_deliver, "qkd_match_success");
    if (k_target > n_delivered) throw DomainError("qkd_match_success: K exceeds N");
    return binomial_tail(n_delivered, k_target, 0.5 * p_deliver);
}

/// Probability that all `count` messages of an exchange get through when each message is
/// sent once and retried at most `retry_cap` more times.
inline double retry_exchange_success(double p_err_c, int retry_cap, int count) {
    detail::check_prob(p_err_c, "retry_exchange_success");
    const double per_message = 1.0 - std::pow(p_err_c, retry_cap + 1);
    return std::pow(per_message, count);
}

}  // namespace oneq::analytic
