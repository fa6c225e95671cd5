#include "prefillsim/cost_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <set>

namespace prefillsim {

void validate(const CostParams& p) {
  if (!(p.alpha > 0) || !std::isfinite(p.alpha)) {
    throw ConfigError("cost.alpha must be finite and > 0");
  }
  for (double v : {p.beta, p.gamma_w, p.gamma_r}) {
    if (v < 0 || !std::isfinite(v)) {
      throw ConfigError("cost coefficients must be finite and >= 0");
    }
  }
}

void validate(const ExecOverheads& o) {
  if (!(o.eta > 0) || o.eta > 1.0) throw ConfigError("cost.eta must be in (0,1]");
  if (o.kappa_graph_ms < 0 || o.kappa_std_ms < o.kappa_graph_ms) {
    throw ConfigError("need 0 <= kappa_graph <= kappa_std");
  }
}

void validate(const RooflineParams& r) {
  for (double v : {r.p_peak, r.b_mem, r.bytes_per_token, r.ops_per_token}) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw ConfigError("roofline parameters must be finite and > 0");
    }
  }
}

LatencyTerms compute_latency(double L, double H, const CostParams& p) {
  LatencyTerms t;
  t.comp_ms = p.alpha * L * (L + 2.0 * H) + p.beta * L;
  t.mem_ms = p.gamma_w * L + p.gamma_r * H;
  return t;
}

double prefill_boundary(const CostParams& p) {
  return std::max(0.0, (p.gamma_w - p.beta) / p.alpha);
}

double reprefill_boundary(const CostParams& p, double H) {
  // t_comp = t_mem reduces to alpha*L^2 + b*L - gamma_r*H = 0 with
  // b = 2*alpha*H + beta - gamma_w. Take the nonnegative root; the
  // rationalized form avoids cancellation when b is large and positive.
  const double b = 2.0 * p.alpha * H + p.beta - p.gamma_w;
  const double disc = b * b + 4.0 * p.alpha * p.gamma_r * H;
  const double sq = std::sqrt(disc);
  double root;
  if (b >= 0) {
    root = (b + sq) > 0 ? 2.0 * p.gamma_r * H / (b + sq) : 0.0;
  } else {
    root = (-b + sq) / (2.0 * p.alpha);
  }
  return std::max(0.0, root);
}

namespace {

// 2-column least squares with nonnegativity clamping: solve y ~ c0*x0+c1*x1,
// zero out a negative coefficient and refit the other against the residual
// basis. Throws DegenerateSamples when the design has rank < 2.
std::pair<double, double> clamped_ls2(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 2) {
    throw DegenerateSamples("design matrix is rank-deficient");
  }
  Eigen::Vector2d c = qr.solve(y);
  auto refit1 = [&](int col) {
    double denom = X.col(col).squaredNorm();
    return denom > 0 ? X.col(col).dot(y) / denom : 0.0;
  };
  if (c[0] < 0 && c[1] < 0) return {0.0, 0.0};
  if (c[0] < 0) {
    c[0] = 0;
    c[1] = std::max(0.0, refit1(1));
  } else if (c[1] < 0) {
    c[1] = 0;
    c[0] = std::max(0.0, refit1(0));
  }
  return {c[0], c[1]};
}

}  // namespace

CostParams fit_params(std::span<const LatencySample> samples) {
  if (samples.empty()) throw EmptyInput("no latency samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  std::set<double> ls, hs;
  for (const auto& s : samples) {
    ls.insert(s.new_tokens);
    hs.insert(s.history_tokens);
  }
  if (n < 4 || ls.size() < 2 || hs.size() < 2) {
    throw DegenerateSamples("need >= 4 samples spanning >= 2 distinct L and H");
  }

  Eigen::MatrixXd Xc(n, 2), Xm(n, 2);
  Eigen::VectorXd yc(n), ym(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<size_t>(i)];
    Xc(i, 0) = s.new_tokens * (s.new_tokens + 2.0 * s.history_tokens);
    Xc(i, 1) = s.new_tokens;
    Xm(i, 0) = s.new_tokens;
    Xm(i, 1) = s.history_tokens;
    yc(i) = s.t_comp_ms;
    ym(i) = s.t_mem_ms;
  }

  CostParams p;
  std::tie(p.alpha, p.beta) = clamped_ls2(Xc, yc);
  std::tie(p.gamma_w, p.gamma_r) = clamped_ls2(Xm, ym);
  return p;
}

Boundedness roofline_classify(double L, const RooflineParams& r) {
  const double ai = r.ops_per_token / r.bytes_per_token * L;
  const double ai_star = r.p_peak / r.b_mem;
  return ai < ai_star ? Boundedness::kMemoryBound : Boundedness::kComputeBound;
}

double batch_service_time(const BatchShape& shape,
                          std::span<const MemberShape> members,
                          const CostParams& p, const ExecOverheads& o) {
  if (static_cast<int>(members.size()) != shape.depth) {
    throw ShapeMismatch("member count " + std::to_string(members.size()) +
                        " != shape depth " + std::to_string(shape.depth));
  }
  double sum = 0;
  for (const auto& [L, H] : members) {
    if (L > shape.l_pad) {
      throw ShapeMismatch("member length " + std::to_string(L) +
                          " exceeds l_pad " + std::to_string(shape.l_pad));
    }
    sum += compute_latency(static_cast<double>(shape.l_pad),
                           static_cast<double>(H), p)
               .total_ms();
  }
  const double kappa = shape.kind == ShapeKind::kGraph ? o.kappa_graph_ms
                                                       : o.kappa_std_ms;
  return kappa + std::pow(static_cast<double>(shape.depth), o.eta - 1.0) * sum;
}

double packed_service_time(std::span<const MemberShape> members,
                           const CostParams& p, const ExecOverheads& o) {
  double sum = 0;
  for (const auto& [L, H] : members) {
    sum += compute_latency(static_cast<double>(L), static_cast<double>(H), p)
               .total_ms();
  }
  return o.kappa_std_ms + sum;
}

}  // namespace prefillsim
