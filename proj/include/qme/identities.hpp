#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qme::identities {

struct IdentityCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Verifies the rotation algebra the feedback step relies on: how y-axis
// rotations conjugate sigma_x and sigma_z, the induced Bloch-vector map,
// the four two-site product expansions, and the entangling-rotation rules
// including the invariance of sigma_z sigma_z. Each check samples random
// angles and reports its worst deviation against the closed form.
std::vector<IdentityCheck> run_identity_battery(std::uint32_t seed = 20260815,
                                                int samples = 100,
                                                double tolerance = 1e-12);

bool all_passed(const std::vector<IdentityCheck>& checks);

}  // namespace qme::identities
