#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace icurv {

// All numeric tolerances in one place. Jet arithmetic is exact to rounding,
// so identities between smooth closed forms are held to 1e-9; comparisons
// that route through the curvature engine get 1e-8; anything that involves
// finite differences or optimization gets 1e-6.
struct Tolerances {
  double tensor_symmetry = 1e-9;      // relative, Riemann symmetries + Bianchi
  double frame_orthonormal = 1e-8;    // max |<v_a,v_b>_g - delta_ab| accepted
  double closed_form_identity = 1e-9; // identities between smooth closed forms
  double engine_vs_closed = 1e-8;     // engine curvature vs closed forms (relative)
  double ode_residual = 1e-10;        // profile ODE residuals (term-scaled)
  double scan = 1e-6;                 // optimization-based scans
  double scan_nonneg = 1e-8;          // slack for nonnegativity scans
  double gs_pivot = 1e-8;             // Gram-Schmidt near-dependence threshold
  double degenerate_plane = 1e-14;    // sectional-curvature denominator floor
  double r0_alignment = 1e-6;         // 1 - |<dir, d_r>_g| for min-Ricci direction
  double zero_set = 1e-10;            // |dF| allowed at zero-set points
  double block_diag = 1e-12;          // off-block coefficients for slices

  void override_by_name(const std::string& key, double value) {
    if (key == "tensor_symmetry") tensor_symmetry = value;
    else if (key == "frame_orthonormal") frame_orthonormal = value;
    else if (key == "closed_form_identity") closed_form_identity = value;
    else if (key == "engine_vs_closed") engine_vs_closed = value;
    else if (key == "ode_residual") ode_residual = value;
    else if (key == "scan") scan = value;
    else if (key == "scan_nonneg") scan_nonneg = value;
    else if (key == "gs_pivot") gs_pivot = value;
    else if (key == "degenerate_plane") degenerate_plane = value;
    else if (key == "r0_alignment") r0_alignment = value;
    else if (key == "zero_set") zero_set = value;
    else if (key == "block_diag") block_diag = value;
    else throw std::invalid_argument("unknown tolerance key: " + key);
  }
};

}  // namespace icurv
