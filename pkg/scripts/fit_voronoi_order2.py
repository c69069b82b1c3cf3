"""Fit large-argument expansion constants for the Voronoi transforms.

The order-0 Voronoi transform of a compactly supported bump obeys, for
x * support >> 1, an oscillatory expansion

    Phi_0(x) ~ 2 pi^4 x i * Integral phi(y) * sum_j
               [c_j cos(6 pi (xy)^{1/3}) + d_j sin(6 pi (xy)^{1/3})]
               * (pi^3 x y)^{-j/3} dy .

The leading pair is known in closed form: (c_1, d_1) = (0, -2/sqrt(3 pi)).
The pair (c_2, d_2) is a property of the triple-divisor form alone, not of
the test function, so it can be measured once and frozen: this script
computes the exact transform on a log-spaced grid, subtracts the j = 1
term, and solves the linear least-squares problem in the j = 2 cos/sin
basis.  A second, differently shaped bump then validates that the fitted
pair transfers, i.e. that it is generic and not an artifact of one test
function.  The result is frozen as ORDER2_FITTED in lfunlab.voronoi.

The order-1 transform admits the same kind of expansion, but its kernel
is Mellin-Barnes against Gamma^3(s + 2) instead of Gamma^3(s + 1), which
lifts the saddle amplitude by one full power of (pi^3 x y) and leaves a
residual y^{-1} weight in the integrand:

    Phi_1(x) ~ 2 pi^4 x i * Integral phi(y) y^{-1} * sum_j
               [c'_j cos(6 pi (xy)^{1/3}) + d'_j sin(6 pi (xy)^{1/3})]
               * (pi^3 x y)^{1 - j/3} dy ,   j = 1, 2, 3 .

No closed form is assumed for the pairs; all three are fitted and then
validated on a second bump.  They drive the far-tail evaluation in
voronoi_residual_profile and are frozen as PHI1_FITTED in lfunlab.voronoi.

Run:  python3 scripts/fit_voronoi_order2.py
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lfunlab.heckegl3 import triple_divisor_form
from lfunlab.quadrature import oscillatory_integral, smooth_bump
from lfunlab.voronoi import VoronoiKernelSpec, voronoi_kernel_batch

D1 = -2.0 / math.sqrt(3.0 * math.pi)


def term_integral(phi, support, x: float, power: float, kind: str,
                  weight: float = 0.0) -> float:
    """Integral of phi(y) y^weight (pi^3 x y)^power cos/sin(6 pi (xy)^{1/3})."""
    lo, hi = support

    def amp(y):
        return (np.asarray(phi(y)) * np.asarray(y) ** weight
                * (math.pi**3 * x * y) ** power)

    def phase(y):
        return 3.0 * (x * y) ** (1.0 / 3.0)

    value = oscillatory_integral(amp, phase, (lo, hi), tol=1e-12).value
    return value.real if kind == "cos" else value.imag


def measure(phi, support, xs: np.ndarray, label: str):
    """Exact Im Phi_0/(2 pi^4 x) and the j=1 remainder on the grid."""
    spec = VoronoiKernelSpec(form=triple_divisor_form(), test_function=phi)
    exact = voronoi_kernel_batch(spec, 0, xs)
    target = np.empty(xs.size)
    basis = np.empty((xs.size, 2))
    for i, x in enumerate(xs):
        lead = D1 * term_integral(phi, support, x, -1.0 / 3.0, "sin")
        target[i] = exact[i].imag / (2.0 * math.pi**4 * x) - lead
        basis[i, 0] = term_integral(phi, support, x, -2.0 / 3.0, "cos")
        basis[i, 1] = term_integral(phi, support, x, -2.0 / 3.0, "sin")
    print(f"[{label}] grid of {xs.size} points, x*lo in "
          f"[{xs[0] * support[0]:.3g}, {xs[-1] * support[0]:.3g}]")
    return target, basis


def fit_order1(phi, support, xs: np.ndarray):
    """Fit (c'_j, d'_j), j = 1..3, of the order-1 transform expansion.

    The order-1 kernel is Mellin-Barnes against Gamma^3(s+2) (one argument
    shift up from Gamma^3(s+1) at order 0), so its saddle ladder starts one
    full power of (pi^3 x y) above the order-0 one: the amplitude rungs are
    phi(y) * y^{-1} * (pi^3 x y)^{1 - j/3} against the same phase.
    """
    from lfunlab.voronoi import _neutral_abscissa

    spec = VoronoiKernelSpec(form=triple_divisor_form(), test_function=phi)
    exact = voronoi_kernel_batch(spec, 1, xs,
                                 _abscissa=_neutral_abscissa(spec, 1))
    worst_re = max(abs(v.real) / abs(v) for v in exact)
    print(f"[order-1] worst Re/|.| on grid = {worst_re:.2e} "
          "(transform should be purely imaginary)")
    target = np.empty(xs.size)
    basis = np.empty((xs.size, 6))
    for i, x in enumerate(xs):
        target[i] = exact[i].imag / (2.0 * math.pi**4 * x)
        for j in (1, 2, 3):
            p = 1.0 - j / 3.0
            basis[i, 2 * (j - 1)] = term_integral(
                phi, support, x, p, "cos", weight=-1.0)
            basis[i, 2 * (j - 1) + 1] = term_integral(
                phi, support, x, p, "sin", weight=-1.0)
    consts, *_ = np.linalg.lstsq(basis, target, rcond=None)
    resid = target - basis @ consts
    scale = np.abs(target) + 1e-300
    print("[order-1] fitted pairs (c'_j, d'_j):")
    for j in (1, 2, 3):
        print(f"  j={j}: ({consts[2 * (j - 1)]!r}, {consts[2 * (j - 1) + 1]!r})")
    for i in (0, xs.size // 2, xs.size - 1):
        print(f"  x*lo={xs[i] * support[0]:10.3g}  "
              f"rel resid={abs(resid[i]) / scale[i]:.3e}")
    return consts


def main() -> None:
    rng = np.random.default_rng(20260816)

    support = (50.0, 100.0)
    phi = smooth_bump(*support)
    xs = np.geomspace(3e3 / support[0], 3e5 / support[0], 32)

    target, basis = measure(phi, support, xs, "fit bump [50,100]")
    consts, *_ = np.linalg.lstsq(basis, target, rcond=None)
    c2, d2 = consts
    print(f"fitted (c2, d2) = ({c2!r}, {d2!r})")

    resid = target - basis @ consts
    scale = np.abs(basis @ consts) + 1e-300
    print("post-fit residual vs (x*lo)^(-1) trend:")
    for i in (0, xs.size // 2, xs.size - 1):
        xl = xs[i] * support[0]
        print(f"  x*lo={xl:10.3g}  rel resid={abs(resid[i]) / scale[i]:.3e}"
              f"  (x*lo)^-1={1.0 / xl:.3e}")

    # Universality check: a different support and plateau must be explained
    # by the same pair to within the order-3 defect.
    support_b = (30.0, 80.0)
    phi_b = smooth_bump(*support_b, plateau_fraction=0.3)
    xs_b = np.geomspace(1e4 / support_b[0], 2e5 / support_b[0], 8)
    target_b, basis_b = measure(phi_b, support_b, xs_b, "check bump [30,80]")
    pred = basis_b @ consts
    worst = 0.0
    for i, x in enumerate(xs_b):
        rel = abs(target_b[i] - pred[i]) / (abs(pred[i]) + 1e-300)
        defect = (x * support_b[0]) ** (-1.0 / 3.0)
        worst = max(worst, rel * (x * support_b[0]) ** (1.0 / 3.0))
        print(f"  x*lo={x * support_b[0]:10.3g}  transfer rel={rel:.3e}"
              f"  order-3 scale={defect:.3e}")
    print(f"transfer rel * (x*lo)^(1/3) worst = {worst:.3f} "
          "(O(1) confirms the pair is generic)")

    # Noise floor sanity: refit on a jittered half-grid and report drift.
    sel = rng.permutation(xs.size)[: xs.size // 2]
    consts_half, *_ = np.linalg.lstsq(basis[sel], target[sel], rcond=None)
    drift = np.abs(consts_half - consts)
    print(f"half-grid refit drift: dc2={drift[0]:.2e} dd2={drift[1]:.2e}")
    print(f"\nFREEZE: ORDER2_FITTED = ({c2!r}, {d2!r})")

    p1 = fit_order1(phi, support, xs)
    # Transfer check for the order-1 pairs on the second bump.
    spec_b = VoronoiKernelSpec(form=triple_divisor_form(), test_function=phi_b)
    from lfunlab.voronoi import _neutral_abscissa
    exact_b = voronoi_kernel_batch(spec_b, 1, xs_b,
                                   _abscissa=_neutral_abscissa(spec_b, 1))
    worst = 0.0
    for i, x in enumerate(xs_b):
        pred = 0.0
        for j in (1, 2, 3):
            p = 1.0 - j / 3.0
            pred += p1[2 * (j - 1)] * term_integral(
                phi_b, support_b, x, p, "cos", weight=-1.0)
            pred += p1[2 * (j - 1) + 1] * term_integral(
                phi_b, support_b, x, p, "sin", weight=-1.0)
        pred *= 2.0 * math.pi**4 * x
        rel = abs(exact_b[i].imag - pred) / abs(exact_b[i])
        worst = max(worst, rel)
        print(f"  order-1 transfer: x*lo={x * support_b[0]:10.3g}  rel={rel:.3e}")
    print(f"order-1 transfer worst rel = {worst:.3e}")
    print(f"\nFREEZE: PHI1_FITTED = (({p1[0]!r}, {p1[1]!r}), "
          f"({p1[2]!r}, {p1[3]!r}), ({p1[4]!r}, {p1[5]!r}))")


if __name__ == "__main__":
    main()
