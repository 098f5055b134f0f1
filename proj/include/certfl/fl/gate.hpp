#pragma once

#include <string>
#include <vector>

#include "certfl/zono/zonotope.hpp"

namespace certfl::fl {

struct RoundMetrics {
  double normal_acc = 0.0;
  double adv_acc = 0.0;
  double certified_acc = 0.0;
  double mean_cert_loss = 0.0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

struct GateThresholds {
  double acc_retain_fraction = 0.9;
  double loss_band_fraction = 0.1;
  zono::CertEpsilon eps_crt = zono::CertEpsilon::crt(0.1);
  zono::CertEpsilon eps_adv = zono::CertEpsilon::adv(0.25);

  void validate() const;
};

// full: all four checks. accuracy_only: normal and adversarial accuracy.
// off: accept everything.
enum class GateMode { full, accuracy_only, off };

struct GateVerdict {
  bool accepted = true;
  // First failed criterion in check order (normal_acc, adv_acc,
  // certified_acc, cert_loss); empty when accepted.
  std::string reason;
  std::vector<std::string> failed;
};

GateVerdict defender_gate(const RoundMetrics& candidate, const RoundMetrics& last_accepted,
                          const GateThresholds& thresholds, GateMode mode = GateMode::full);

const char* gate_mode_name(GateMode mode);
GateMode parse_gate_mode(const std::string& name);

}  // namespace certfl::fl
