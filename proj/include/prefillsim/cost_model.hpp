#pragma once

// Analytical per-step latency model for prefill work, plus the derived
// compute/memory crossover boundaries, parameter fitting from measured
// samples, and batch-level service-time synthesis.

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prefillsim/types.hpp"

namespace prefillsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-token cost coefficients, all in ms. alpha scales the quadratic
// attention term, beta the linear compute term, gamma_w/gamma_r the
// KV-cache write/read bandwidth terms.
struct CostParams {
  double alpha = 2e-5;
  double beta = 0.005;
  double gamma_w = 0.01012;  // puts the first-prefill boundary at 256 tokens
  double gamma_r = 0.002;
};

// Fixed launch overheads and the batching-efficiency exponent.
struct ExecOverheads {
  double kappa_graph_ms = 0.05;
  double kappa_std_ms = 0.5;
  double eta = 0.7;  // in (0,1]; 1 = no efficiency gain from depth
};

// Peak-rate device description for the arithmetic-intensity classifier.
// AI(L) = (ops_per_token / bytes_per_token) * L, compared against
// AI* = p_peak / b_mem. Defaults put the crossover at exactly 256 tokens.
struct RooflineParams {
  double p_peak = 1e15;          // ops/s
  double b_mem = 4e12;           // bytes/s
  double bytes_per_token = 131072.0;
  double ops_per_token = 128000.0;
};

// One measured (or synthesized) per-request latency observation.
struct LatencySample {
  double new_tokens = 0;      // L
  double history_tokens = 0;  // H
  double t_comp_ms = 0;
  double t_mem_ms = 0;
};

enum class ShapeKind { kGraph, kStandard };

// Execution shape of a dispatched batch: every row is padded to l_pad
// tokens and the batch holds exactly `depth` rows.
struct BatchShape {
  Tokens l_pad = 0;
  int depth = 0;
  ShapeKind kind = ShapeKind::kStandard;
};

struct LatencyTerms {
  double comp_ms = 0;
  double mem_ms = 0;
  double total_ms() const { return comp_ms + mem_ms; }
};

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void validate(const CostParams& p);
void validate(const ExecOverheads& o);
void validate(const RooflineParams& r);

// t_comp = alpha*L*(L+2H) + beta*L ; t_mem = gamma_w*L + gamma_r*H
LatencyTerms compute_latency(double new_tokens, double history_tokens,
                             const CostParams& p);

// Length below which a first prefill (H=0) is memory-bound:
// max(0, (gamma_w - beta)/alpha).
double prefill_boundary(const CostParams& p);

// Positive root of alpha*L^2 + (2*alpha*H + beta - gamma_w)*L - gamma_r*H,
// i.e. the length where t_comp(L,H) = t_mem(L,H). Approaches
// gamma_r/(2*alpha) as H grows.
double reprefill_boundary(const CostParams& p, double history_tokens);

// Least-squares recovery of CostParams from samples. t_comp is regressed
// on {L^2 + 2LH, L} (which enforces the shared alpha), t_mem on {L, H}.
// Negative coefficients are clamped to zero and the remaining one refit.
// Throws EmptyInput on no samples, DegenerateSamples when fewer than 4
// samples, fewer than 2 distinct L or H values, or a rank-deficient design.
CostParams fit_params(std::span<const LatencySample> samples);

enum class Boundedness { kMemoryBound, kComputeBound };

// memory_bound iff AI(L) < AI*; ties classify as compute_bound.
Boundedness roofline_classify(double new_tokens, const RooflineParams& r);

// (L, H) per batch row.
using MemberShape = std::pair<Tokens, Tokens>;

// kappa(kind) + B^(eta-1) * sum_i [t_comp(l_pad, H_i) + t_mem(l_pad, H_i)]
// with B = shape.depth. Requires |members| == shape.depth and every
// member L <= l_pad (padding cost is real: l_pad enters every term).
double batch_service_time(const BatchShape& shape,
                          std::span<const MemberShape> members,
                          const CostParams& p, const ExecOverheads& o);

// Token-packed (unpadded, unshaped) batch as used by the unified FCFS
// baseline: kappa_std + sum_i [t_comp(L_i,H_i) + t_mem(L_i,H_i)]. No
// batching-efficiency exponent; packing is not shape-aligned execution.
double packed_service_time(std::span<const MemberShape> members,
                           const CostParams& p, const ExecOverheads& o);

}  // namespace prefillsim
