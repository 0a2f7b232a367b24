#pragma once

#include <cstdint>

#include "easal/net.hpp"

// Finite-difference checking against the analytic backward pass. The network
// is piecewise smooth: whenever a probe step flips a ReLU activation sign,
// the central difference straddles a kink and stops estimating the gradient
// the backward pass defines. Each probe therefore hashes the full ReLU mask;
// a parameter whose +h/-h masks disagree is re-checked at a smaller step
// (and at a looser tolerance, since the difference quotient loses digits).
namespace grad_check {

struct Probe {
  double loss = 0.0;
  std::uint64_t masks = 0;
};

inline Probe probe(const easal::Model& m, const easal::Tensor& img, const easal::Tensor& s_rbd,
                   const easal::TriLabelMap& labels) {
  easal::FullForward fwd = easal::forward_full(m, img, s_rbd);
  Probe p;
  p.masks = 1469598103934665603ULL;
  auto mix = [&p](bool bit) { p.masks = (p.masks ^ (bit ? 0x9eULL : 0x31ULL)) * 1099511628211ULL; };
  for (const easal::Tensor& t : fwd.frontend.enc_pre)
    for (double v : t.data) mix(v > 0.0);
  for (const easal::Tensor& t : fwd.fused.fus_pre)
    for (double v : t.data) mix(v > 0.0);
  p.loss = easal::balanced_loss(fwd.frontend.s_deep, labels).loss +
           easal::balanced_loss(fwd.context.output, labels).loss;
  return p;
}

enum class DiffKind { smooth, kink_retried, kink_skipped };

struct DiffResult {
  double fd = 0.0;
  DiffKind kind = DiffKind::kink_skipped;
};

inline DiffResult central_diff(easal::Model& m, easal::Tensor& params, std::size_t i, const easal::Tensor& img,
                               const easal::Tensor& s_rbd, const easal::TriLabelMap& labels, double step,
                               double fallback_step) {
  DiffResult r;
  bool first = true;
  for (double h : {step, fallback_step}) {
    const double keep = params.data[i];
    params.data[i] = keep + h;
    const Probe up = probe(m, img, s_rbd, labels);
    params.data[i] = keep - h;
    const Probe dn = probe(m, img, s_rbd, labels);
    params.data[i] = keep;
    if (up.masks == dn.masks) {
      r.fd = (up.loss - dn.loss) / (2.0 * h);
      r.kind = first ? DiffKind::smooth : DiffKind::kink_retried;
      return r;
    }
    first = false;
  }
  return r;
}

}  // namespace grad_check
