#include "certfl/fl/gate.hpp"

#include <cmath>

#include "certfl/error.hpp"

namespace certfl::fl {

void GateThresholds::validate() const {
  if (!(acc_retain_fraction > 0.0 && acc_retain_fraction <= 1.0)) {
    throw ConfigError("gate acc_retain_fraction must be in (0, 1]");
  }
  if (!(loss_band_fraction >= 0.0) || !std::isfinite(loss_band_fraction)) {
    throw ConfigError("gate loss_band_fraction must be >= 0");
  }
  eps_crt.validate();
  eps_adv.validate();
}

GateVerdict defender_gate(const RoundMetrics& candidate, const RoundMetrics& last_accepted,
                          const GateThresholds& thresholds, GateMode mode) {
  GateVerdict v;
  if (mode == GateMode::off) return v;
  const double keep = thresholds.acc_retain_fraction;
  if (!(candidate.normal_acc >= keep * last_accepted.normal_acc)) v.failed.push_back("normal_acc");
  if (!(candidate.adv_acc >= keep * last_accepted.adv_acc)) v.failed.push_back("adv_acc");
  if (mode == GateMode::full) {
    if (!(candidate.certified_acc >= keep * last_accepted.certified_acc)) v.failed.push_back("certified_acc");
    const double band = thresholds.loss_band_fraction * last_accepted.mean_cert_loss;
    if (!(std::abs(candidate.mean_cert_loss - last_accepted.mean_cert_loss) <= band)) v.failed.push_back("cert_loss");
  }
  if (!v.failed.empty()) {
    v.accepted = false;
    v.reason = v.failed.front();
  }
  return v;
}

const char* gate_mode_name(GateMode mode) {
  switch (mode) {
    case GateMode::full: return "full";
    case GateMode::accuracy_only: return "accuracy_only";
    case GateMode::off: return "off";
  }
  return "?";
}

GateMode parse_gate_mode(const std::string& name) {
  if (name == "full") return GateMode::full;
  if (name == "accuracy_only") return GateMode::accuracy_only;
  if (name == "off") return GateMode::off;
  throw ConfigError("unknown gate mode '" + name + "' (expected full, accuracy_only or off)");
}

}  // namespace certfl::fl
