#ifndef VSG_TRUST_HPP
#define VSG_TRUST_HPP

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "vsg/errors.hpp"

namespace vsg {

namespace detail {

inline void check_prob(double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument(std::string(name) + " must lie in [0,1], got " +
                                    std::to_string(x));
    }
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace detail

// A delegator's per-evidence choice probabilities, as seen by the trust update.
struct TrustMember {
    double accuracy;  // Pr(delegate | evidence positive)
    double error;     // Pr(delegate | evidence negative)
};

/// Unconditional probability that a user delegates to a validator with
/// integrity p: qbar + p*(q - qbar).
inline double prior_choice_prob(double q, double qbar, double p) {
    detail::check_prob(q, "accuracy");
    detail::check_prob(qbar, "error");
    detail::check_prob(p, "integrity");
    return q * p + qbar * (1.0 - p);
}

// Core Bayes ratio over the two integrity hypotheses, given the log-products
// of member accuracies and errors. Products arrive as sums of logs; the
// max-shift keeps the exponentials in range for groups of hundreds.
inline double trust_from_log_products(double log_prod_q, double log_prod_qb,
                                      double z, double p) {
    const double shift = std::max(log_prod_q, log_prod_qb);
    if (shift == detail::kNegInf) {
        throw DegenerateEvidenceError(
            "trust update degenerate: both accuracy and error products are zero");
    }
    const double eq = std::exp(log_prod_q - shift);
    const double eqb = std::exp(log_prod_qb - shift);
    const double stay = eq * z * p + eqb * (1.0 - z) * p;
    const double leave = eq * (1.0 - z) * (1.0 - p) + eqb * z * (1.0 - p);
    const double total = stay + leave;
    if (total <= 0.0) {
        throw DegenerateEvidenceError("trust update degenerate: zero posterior mass");
    }
    return stay / total;
}

/// Posterior integrity after observing a single user's delegation.
inline double trust_single(double q, double qbar, double z, double p) {
    detail::check_prob(q, "accuracy");
    detail::check_prob(qbar, "error");
    detail::check_prob(z, "evidence_quality");
    detail::check_prob(p, "integrity");
    return trust_from_log_products(detail::safe_log(q), detail::safe_log(qbar), z, p);
}

/// Posterior integrity after observing a whole delegator group. An empty
/// group returns the prior.
inline double trust_group(std::span<const TrustMember> members, double z, double p) {
    detail::check_prob(z, "evidence_quality");
    detail::check_prob(p, "integrity");
    double sum_log_q = 0.0;
    double sum_log_qb = 0.0;
    for (const TrustMember& m : members) {
        detail::check_prob(m.accuracy, "accuracy");
        detail::check_prob(m.error, "error");
        sum_log_q += detail::safe_log(m.accuracy);
        sum_log_qb += detail::safe_log(m.error);
    }
    return trust_from_log_products(sum_log_q, sum_log_qb, z, p);
}

/// Closed-form trust for k identical delegators under perfect evidence:
/// q^k p / (q^k p + qbar^k (1-p)).
inline double trust_hupe(long k, double q, double qbar, double p) {
    if (k < 0) throw std::invalid_argument("group size k must be non-negative");
    detail::check_prob(q, "accuracy");
    detail::check_prob(qbar, "error");
    detail::check_prob(p, "integrity");
    if (k == 0) return p;
    const double kd = static_cast<double>(k);
    return trust_from_log_products(kd * detail::safe_log(q),
                                   kd * detail::safe_log(qbar), 1.0, p);
}

/// Marginal probability of a positive evidence signal.
inline double evidence_prob(double p, double z) {
    detail::check_prob(p, "integrity");
    detail::check_prob(z, "evidence_quality");
    return z * p + (1.0 - z) * (1.0 - p);
}

}  // namespace vsg

#endif
