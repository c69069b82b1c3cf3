"""Rank-3 Voronoi transform and the dual-sum identity it feeds.

The transform takes a smooth compactly supported test function phi through
a Mellin-Barnes integral with a six-gamma quotient,

    Phi_k(x) = int_{Re s = sigma} (pi^3 x)^{-s}
               prod_i Gamma((1+s+2k+a_i)/2) / prod_i Gamma((-s-a_i)/2)
               phitilde(-s-k) ds,         k in {0, 1},

a BARE line integral (no 1/(2 pi i); the i from ds = i dv is kept), where
(a_1, a_2, a_3) are the form's spherical parameters and phitilde(s) =
int phi(x) x^{s-1} dx.  Substituting s = 2w - 1 gives the equivalent form

    Phi_k(x) = 2 pi^3 x int_{Re w = (1+sigma)/2} (pi^3 x)^{-2w}
               prod_i Gamma(w+k+a_i/2) / prod_i Gamma(1/2-w-a_i/2)
               phitilde(-2w+1-k) dw,

implemented as an independent route and cross-checked as a dual-
representation oracle.  The two orders combine into

    Phi^0(x) = Phi_0(x) + (pi^{-3} c^3 n / (m1^2 m2 i)) Phi_1(x),
    Phi^1(x) = Phi_0(x) - (pi^{-3} c^3 n / (m1^2 m2 i)) Phi_1(x),

and the summation identity reads, for gcd(a, c) = 1 with a abar = 1 (c),

    sum_{m>0} A(n, m) e(m abar / c) phi(m)
      = (c pi^{-5/2} / 4i) sum_{m1 | cn} sum_{m2>0} A(m1, m2)/(m1 m2)
            [ S(n a,  m2; n c / m1) Phi^0(m2 m1^2 / (c^3 n))
            + S(n a, -m2; n c / m1) Phi^1(m2 m1^2 / (c^3 n)) ].

For x large against the reciprocal support scale, Phi_0 has the oscillatory
expansion (order K)

    Phi_0(x) ~ 2 pi^4 x i int phi(y) sum_{j<=K}
               [ c_j cos(6 pi (xy)^{1/3}) + d_j sin(6 pi (xy)^{1/3}) ]
               / (pi^3 x y)^{j/3} dy,

with c_1 = 0, d_1 = -2/sqrt(3 pi) for the parameter-free degenerate form;
the order-2 constants are NOT carried by the source formulas and ship as
numerically fitted configuration (see ORDER2_FITTED and scripts/).  The
order-1 transform has the analogous fitted ladder PHI1_FITTED; together
they evaluate the far tail of the double sum, where exact contour kernels
would be needlessly expensive.

Degenerate-form main term.  The identity above is stated for cuspidal
coefficients, whose twisted Dirichlet series D(s) = sum_m A(n, m)
e(m abar / c) m^{-s} is entire.  The triple-divisor form is polar: its
D(s) has a pole at s = 1 (order up to three), and the contour shift that
produces the dual sum picks up its residue, so

    LHS = Res_{s=1}[ phitilde(s) D(s) ] + dual sum.

For that form and n = 1 the series factors exactly over residue classes
into Hurwitz zetas, D(s) = c^{-3s} sum_{r1,r2,r3 mod c} e(abar r1 r2 r3/c)
prod_i zeta_H(s, r_i/c), and polar_main_term computes the residue by a
small positively oriented circle around s = 1.  Cuspidal forms get a zero
main term and the classical identity back.

Contour mechanics.  The integrand's modulus along Re s = sigma behaves like
|v|^{(3 + 6 sigma + 6 k + 2 sum_i Re a_i)/2} times the test function's
Mellin decay (sub-exponential for the exp-ramp bumps), so the quadrature
cost depends strongly on the abscissa.  Public evaluators honor the
abscissa in the spec exactly; the double-sum verifier places each kernel
order's contour at the modulus-neutral abscissa -(1+2k)/2 - sum(Re a_i)/3
(clamped right of the poles), which is analytically free and keeps the
required height near the test function's own decay scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .afe import _ContourKernel
from .exactarith import kloosterman, mod_inverse
from .heckegl3 import GL3Form, coefficient_block
from .quadrature import NonDecayError, gauss_legendre_panels, oscillatory_integral
from .special import PoleError, RegimeError, log_gamma
from .util import ordered_parallel_map

__all__ = [
    "VoronoiKernelSpec",
    "TruncationRecord",
    "VoronoiSides",
    "ORDER2_FITTED",
    "mellin_transform",
    "voronoi_kernel",
    "voronoi_kernel_with_error",
    "voronoi_kernel_batch",
    "combined_kernel",
    "voronoi_kernel_asymptotic",
    "polar_main_term",
    "voronoi_sides",
    "voronoi_residual_profile",
]

# Order-2 expansion constants (c2, d2), least-squares fitted against the
# exact transform on the degenerate form over x*support in [3e3, 3e5] by
# scripts/fit_voronoi_order2.py.  Derived configuration, not source-given.
# The fit reproduces a second, differently shaped bump to within the
# order-3 defect, and c2 lands within 2e-4 (relative) of 1/(9 sqrt(3 pi))
# while d2 is consistent with zero at the fit's contamination level.
ORDER2_FITTED = (0.03619608172960714, 6.670287217457333e-05)

# Large-argument ladder of the order-1 transform: pairs (c'_j, d'_j) against
# amplitude phi(y) y^{-1} (pi^3 x y)^{1 - j/3} and phase 6 pi (xy)^{1/3},
# j = 1, 2, 3.  Fitted by the same script (residuals ~1e-10 on the fit grid,
# ~1e-6 transferring to a differently shaped bump).  The fit lands on exact-
# looking values: c'_1 = -2/sqrt(3 pi) to 10 digits, d'_2 = c'_1/18 to 5
# digits, c'_3 = -d'_2/9 to 4 digits, mirroring the order-0 ladder rotated
# a quarter period; frozen here as fitted, not as assumed closed forms.
PHI1_FITTED = (
    (-0.6514700159692346, 8.473726335412116e-10),
    (3.1915180355832452e-09, -0.036193016522031315),
    (0.004021701880608672, 1.9901150181951373e-05),
)

_MELLIN_CHUNK = 512  # contour points per block in the Mellin matrix product


def _support_of(phi, support):
    if support is None:
        support = getattr(phi, "support", None)
    if support is None:
        raise ValueError(
            "test function carries no .support attribute; pass support=(lo, hi)"
        )
    lo, hi = float(support[0]), float(support[1])
    if not 0.0 < lo < hi:
        raise ValueError(f"support must satisfy 0 < lo < hi, got ({lo}, {hi})")
    return lo, hi


def _mellin_evaluator(phi: Callable, support: tuple) -> Callable:
    """Batched phitilde(s) = int phi(x) x^{s-1} dx on a cached node grid.

    The grid is rebuilt whenever a batch needs more height than it was
    sized for: panel width tracks the fastest x^{i Im s} oscillation at the
    left end of the support (period 2 pi lo / |Im s|), with a floor fine
    enough to resolve the bump itself.  Evaluation is chunked so the
    (contour nodes) x (grid nodes) phase matrix stays memory-bounded.
    """
    lo, hi = support
    lnc = 0.5 * (math.log(lo) + math.log(hi))
    state: dict = {"H": -1.0}

    def at(s):
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        H = float(np.max(np.abs(s.imag))) if s.size else 1.0
        if H > state["H"]:
            Hb = max(16.0, 1.5 * H)
            # 12-node panels spanning <= 1.8 periods of the fastest x^{i Im s}
            width = min((hi - lo) / 16.0, 2.0 * math.pi * 1.8 * lo / Hb)
            n_panels = max(1, int(math.ceil((hi - lo) / width)))
            x, w = gauss_legendre_panels(lo, hi, n_panels, 12)
            # center the log phases: the grid-side argument stays below
            # half the log-width of the support, keeping the phase rounding
            # (~1e-16 per radian) from swamping cancellation at big heights
            state.update(
                H=Hb, lnx=np.log(x) - lnc, wphi=w * np.asarray(phi(x), dtype=complex)
            )
        out = np.empty(s.shape, dtype=complex)
        for i in range(0, s.size, _MELLIN_CHUNK):
            blk = s[i : i + _MELLIN_CHUNK]
            out[i : i + _MELLIN_CHUNK] = (
                np.exp(np.outer(blk - 1.0, state["lnx"])) @ state["wphi"]
            )
        return out * np.exp((s - 1.0) * lnc)

    return at


def mellin_transform(phi: Callable, s, support: tuple | None = None):
    """int_0^inf phi(x) x^{s-1} dx for compactly supported smooth phi.

    Entire in s; decays faster than any power of |Im s| (but for the
    exp-ramp bumps only sub-exponentially, roughly exp(-c sqrt(Im s)) --
    tests pin the measured profile).  Scalar s gives a complex scalar, an
    array gives an array.
    """
    sup = _support_of(phi, support)
    vals = _mellin_evaluator(phi, sup)(s)
    return complex(vals[0]) if np.isscalar(s) or np.asarray(s).ndim == 0 else vals


@dataclass(frozen=True)
class VoronoiKernelSpec:
    """Form parameters, test function, and contour abscissa for the transform.

    The test function must be smooth, real-valued, and compactly supported
    in (0, inf), advertising its support via a .support attribute (a
    SmoothBump does).  sigma must stay right of the rightmost pole of the
    numerator gammas, sigma > max_i(-1 - Re a_i); when omitted it defaults
    to that bound plus one half.
    """

    form: GL3Form
    test_function: Callable
    sigma: float | None = None

    def __post_init__(self) -> None:
        _support_of(self.test_function, None)
        bound = self.pole_bound()
        if self.sigma is None:
            object.__setattr__(self, "sigma", bound + 0.5)
        if not self.sigma > bound:
            raise PoleError(
                f"contour abscissa {self.sigma} is not right of the numerator "
                f"gamma poles (needs sigma > {bound})"
            )

    def spherical(self) -> tuple:
        return (complex(self.form.alpha), complex(self.form.beta), complex(self.form.gamma))

    def pole_bound(self, k: int = 0) -> float:
        return max(-1.0 - 2 * k - z.real for z in self.spherical())

    @property
    def support(self) -> tuple:
        return _support_of(self.test_function, None)


@dataclass(frozen=True)
class TruncationRecord:
    m2_cutoff: int
    tail_estimate: float


@dataclass(frozen=True)
class VoronoiSides:
    lhs: complex
    rhs: complex
    truncation: TruncationRecord
    main_term: complex = 0j  # polar-form residue included in rhs; 0 for cuspidal

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _grow_kernel(
    kfunc: Callable,
    kfloor: Callable,
    sigma: float,
    osc: float,
    tol: float,
    symmetric: bool,
    vmax0: float = 512.0,
    cap: float = 6000.0,
    nodes: int = 12,
) -> _ContourKernel:
    """Incrementally grown grid for (1/2 pi i) int_{(sigma)} y^{-u} K(u) du.

    Extends the height in geometric segments, keeping already-evaluated
    nodes, until the outermost panel's mass drops below tol of the total
    OR below the evaluation noise floor reported by kfloor (the point past
    which extending integrates rounding noise, not signal).  The kernel's
    tail_estimate combines the truncated edge mass with the accumulated
    root-sum-square quadrature noise, so callers get an honest absolute
    error scale even on contours where K's true decay is unresolvable in
    double precision.
    """
    # 12-node panels spanning <= 9 radians (~1.4 periods) of the fastest phase
    width = min(0.5, 9.0 / max(1.0, osc))
    xs_parts: list = []
    ws_parts: list = []
    total = 0.0
    noise_sq = 0.0
    v_lo, v_hi = 0.0, float(vmax0)
    while True:
        edge = 0.0
        edge_floor = 0.0
        for sign in (1,) if symmetric else (1, -1):
            a, b = (v_lo, v_hi) if sign == 1 else (-v_hi, -v_lo)
            n_panels = max(1, int(math.ceil((b - a) / width)))
            x, gw = gauss_legendre_panels(a, b, n_panels, nodes)
            kv = kfunc(sigma + 1j * x)
            w = gw * kv / (2.0 * math.pi)
            fl = np.abs(gw) * np.asarray(kfloor(sigma + 1j * x), dtype=float) / (2.0 * math.pi)
            xs_parts.append(x)
            ws_parts.append(w)
            total += float(np.sum(np.abs(w)))
            noise_sq += float(np.sum(fl * fl))
            out = slice(-nodes, None) if sign == 1 else slice(None, nodes)
            edge += float(np.sum(np.abs(w[out])))
            edge_floor += float(np.sum(fl[out]))
        if total > 0.0 and (edge <= tol * total or edge <= 3.0 * edge_floor):
            tail = edge + math.sqrt(noise_sq)
            return _ContourKernel(
                sigma, np.concatenate(xs_parts), np.concatenate(ws_parts), symmetric, tail
            )
        if v_hi >= cap:
            raise NonDecayError(
                f"contour kernel mass at height {v_hi:.0f} still above both the "
                f"decay target and the noise floor"
            )
        v_lo, v_hi = v_hi, min(1.6 * v_hi, float(cap))


def _phi_contour_kernel(
    spec: VoronoiKernelSpec,
    k: int,
    route: str,
    max_abs_ln_y: float,
    abscissa: float | None = None,
):
    """Contour kernel whose .apply gives (1/2 pi i) int y^{-u} K(u) du.

    route "direct": u on the s-line, y = pi^3 x, K = six-gamma quotient
    times phitilde(-u-k); route "shifted": the s = 2w-1 substitution, u on
    the w-line, y = (pi^3 x)^2.  Callers restore the bare-integral
    normalization (2 pi i) and the shifted route's 2 pi^3 x prefactor.
    `abscissa` overrides the spec's sigma (in s-coordinates) -- the value
    is abscissa-independent in the pole-free half-plane for order k, which
    the dual-route and contour-shift tests verify.
    """
    if k not in (0, 1):
        raise ValueError(f"kernel order k must be 0 or 1, got {k}")
    abg = spec.spherical()
    sigma_s = spec.sigma if abscissa is None else float(abscissa)
    if not sigma_s > spec.pole_bound(k):
        raise PoleError(
            f"abscissa {sigma_s} is not right of the order-{k} numerator poles"
        )
    mell = _mellin_evaluator(spec.test_function, spec.support)
    lo, hi = spec.support
    symmetric = all(abs(z.imag) < 1e-12 for z in abg)

    if route == "direct":
        sigma = sigma_s
        mell_re = -sigma_s - k

        def quot_log_mag(u):
            num = sum(log_gamma((1.0 + u + 2 * k + z) / 2.0) for z in abg)
            den = sum(log_gamma((-u - z) / 2.0) for z in abg)
            return num - den

        def kfunc(u):
            return np.exp(quot_log_mag(u)) * mell(-u - k)

    elif route == "shifted":
        sigma = (1.0 + sigma_s) / 2.0
        mell_re = -2.0 * sigma + 1.0 - k

        def quot_log_mag(u):
            num = sum(log_gamma(u + k + z / 2.0) for z in abg)
            den = sum(log_gamma(0.5 - u - z / 2.0) for z in abg)
            return num - den

        def kfunc(u):
            return np.exp(quot_log_mag(u)) * mell(-2.0 * u + 1.0 - k)

    else:
        raise ValueError(f"unknown route {route!r}")

    # double-precision floor of the Mellin factor: phase arguments of size
    # (height) x (centered log half-width) round at ~1e-16 per radian, on
    # top of the plain summation rounding of the unsigned mass
    mell_mass = abs(complex(mell(np.array([complex(mell_re, 0.0)]))[0]))
    half_ln = 0.5 * (math.log(hi) - math.log(lo))
    mell_rate = 2.0 if route == "shifted" else 1.0  # Mellin height per unit contour height

    def kfloor(u):
        h = np.abs(np.imag(np.atleast_1d(u))) * mell_rate
        return (
            2e-16
            * max(mell_mass, 1e-300)
            * (1.0 + h * half_ln)
            * np.exp(np.real(quot_log_mag(u)))
        )

    # oscillation budget (radians per unit height): y^{-iv} itself, the
    # Mellin factor's phase speed (doubled on the shifted route, bounded by
    # the larger |log| end of the support), and the gamma-quotient phase
    # drifting like (3/2) ln v across the realistic height range
    osc = (
        max_abs_ln_y
        + mell_rate * max(abs(math.log(lo)), abs(math.log(hi)))
        + 12.0
    )
    return _grow_kernel(kfunc, kfloor, sigma, osc, 1e-11, symmetric)


def voronoi_kernel_with_error(
    spec: VoronoiKernelSpec, k: int, x: float, route: str = "direct"
) -> tuple:
    """(value, truncation error estimate) for the order-k transform at x."""
    if x <= 0:
        raise ValueError("transform argument must be positive")
    y = math.pi**3 * x
    if route == "direct":
        kern = _phi_contour_kernel(spec, k, route, abs(math.log(y)))
        scale = 2.0 * math.pi
        val = scale * 1j * complex(kern.apply(np.array([y]))[0])
        err = scale * kern.tail_estimate * y ** (-kern.sigma)
        return val, err
    if route == "shifted":
        # 2 pi^3 x times the bare w-integral; the substitution halves the
        # contour height and doubles the log-argument speed.
        kern = _phi_contour_kernel(spec, k, route, 2.0 * abs(math.log(y)))
        scale = 4.0 * math.pi * y
        val = scale * 1j * complex(kern.apply(np.array([y * y]))[0])
        err = scale * kern.tail_estimate * (y * y) ** (-kern.sigma)
        return val, err
    raise ValueError(f"unknown route {route!r}")


def voronoi_kernel(spec: VoronoiKernelSpec, k: int, x: float, route: str = "direct") -> complex:
    """The order-k Mellin-Barnes transform at x > 0 (bare-ds normalization).

    route selects the contour parametrization; both evaluate the same
    analytic object and agree to quadrature accuracy, which tests pin.
    Evaluation honors spec.sigma exactly.
    """
    return voronoi_kernel_with_error(spec, k, x, route)[0]


def _apply_chunked(kern, ys: np.ndarray, chunk: int = 256) -> np.ndarray:
    """kern.apply in argument blocks, bounding the phase-matrix memory."""
    if ys.size <= chunk:
        return kern.apply(ys)
    return np.concatenate([kern.apply(ys[i : i + chunk]) for i in range(0, ys.size, chunk)])


def voronoi_kernel_batch(
    spec: VoronoiKernelSpec,
    k: int,
    xs,
    route: str = "direct",
    _abscissa: float | None = None,
) -> np.ndarray:
    """Order-k transform on an array of arguments sharing one contour grid."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("transform arguments must be positive")
    ys = math.pi**3 * xs
    lnys = np.abs(np.log(ys))
    if route == "direct":
        kern = _phi_contour_kernel(spec, k, route, float(np.max(lnys)), _abscissa)
        return 2j * math.pi * _apply_chunked(kern, ys)
    if route == "shifted":
        kern = _phi_contour_kernel(spec, k, route, 2.0 * float(np.max(lnys)), _abscissa)
        return 4j * math.pi * ys * _apply_chunked(kern, ys * ys)
    raise ValueError(f"unknown route {route!r}")


def combined_kernel(
    spec: VoronoiKernelSpec, variant: int, x: float, c: int, n: int, m1: int, m2: int
) -> complex:
    """Phi_0(x) +/- (pi^{-3} c^3 n / (m1^2 m2 i)) Phi_1(x); variant 0 is +."""
    if variant not in (0, 1):
        raise ValueError(f"variant must be 0 or 1, got {variant}")
    phi0 = voronoi_kernel(spec, 0, x)
    phi1 = voronoi_kernel(spec, 1, x)
    mix = (c**3 * n) / (math.pi**3 * m1**2 * m2 * 1j)
    return phi0 + mix * phi1 if variant == 0 else phi0 - mix * phi1


def voronoi_kernel_asymptotic(spec: VoronoiKernelSpec, x: float, order: int = 1) -> complex:
    """Large-argument oscillatory expansion of the order-0 transform.

    Valid once x times the support scale is large; the j-th term carries
    weight (pi^3 x y)^{-j/3} against cos/sin(6 pi (xy)^{1/3}).  Order 1 uses
    only the analytically known constants (c1, d1) = (0, -2/sqrt(3 pi));
    order 2 adds the fitted pair ORDER2_FITTED.  The relative defect of
    order K scales like (x*support)^{-K/3}.
    """
    if x <= 0:
        raise ValueError("transform argument must be positive")
    lo, hi = spec.support
    if x * lo <= 1.0:
        raise RegimeError(
            f"asymptotic expansion needs x * support scale >> 1, got {x * lo:.3g}"
        )
    if order < 1:
        raise ValueError("order must be at least 1")
    if order > 2:
        raise ValueError("constants are available through order 2 only")
    consts = [(0.0, -2.0 / math.sqrt(3.0 * math.pi)), ORDER2_FITTED][:order]

    phi = spec.test_function
    total = 0.0 + 0.0j
    for j, (c_j, d_j) in enumerate(consts, start=1):
        if c_j == 0.0 and d_j == 0.0:
            continue
        amp = lambda y, jj=j: np.asarray(phi(y)) * (math.pi**3 * x * y) ** (-jj / 3.0)
        phase = lambda y: 3.0 * (x * y) ** (1.0 / 3.0)
        osc = oscillatory_integral(amp, phase, (lo, hi), tol=1e-11)
        # c cos(th) + d sin(th) = Re[(c - i d) e^(i th)] for real amplitude
        total += complex(c_j - 1j * d_j) * osc.value
    return 2.0 * math.pi**4 * x * 1j * total.real


def _neutral_abscissa(spec: VoronoiKernelSpec, k: int) -> float:
    """Contour where the six-gamma quotient's modulus is height-neutral.

    |quotient(sigma+iv)| ~ |v|^{(3+6 sigma+6k+2 sum Re a_i)/2}, so the
    exponent vanishes at sigma = -(1+2k)/2 - sum(Re a_i)/3; clamped half a
    unit right of the order-k poles when that point is out of range.
    """
    s = sum(z.real for z in spec.spherical())
    return max(-(1.0 + 2 * k) / 2.0 - s / 3.0, spec.pole_bound(k) + 0.5)


def polar_main_term(
    form: GL3Form,
    n: int,
    a: int,
    c: int,
    phi: Callable,
    support: tuple | None = None,
) -> complex:
    """Residue at s = 1 of phitilde(s) times the twisted coefficient series.

    Cuspidal forms return 0: their twisted series is entire and the dual-sum
    identity needs no correction.  For the polar (triple-divisor) form the
    series D(s) = sum_m A(1, m) e(m abar / c) m^{-s} factors over residue
    classes mod c into products of Hurwitz zetas (see the module docstring),
    and the residue is computed as a 64-node trapezoid integral over the
    circle |s - 1| = 1/2 — spectrally accurate since the integrand is
    analytic on an annulus around that circle.  Only the first coefficient
    row factors this way, so twist rows n > 1 are rejected.

    The result is real for real test functions (the polar parts of the
    class series depend only on gcd(r, c), pairing conjugate twists), but
    is returned as the complex value the quadrature produces.
    """
    if not form.polar:
        return 0j
    if n != 1:
        raise ValueError(
            "polar main term is implemented for twist row n = 1 only"
        )
    import mpmath

    lo, hi = _support_of(phi, support)
    abar = int(mod_inverse(a, c).value)
    mell = _mellin_evaluator(phi, (lo, hi))

    rho, nodes = 0.5, 64
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    s_circle = 1.0 + rho * np.exp(1j * theta)
    with mpmath.workdps(20):
        zh = np.array(
            [
                [complex(mpmath.zeta(complex(s), r / c)) for s in s_circle]
                for r in range(1, c + 1)
            ]
        )
    # pair sums over r1 r2 = t (c), then the twisted triple contraction
    pair = np.zeros((c, nodes), dtype=complex)
    for r1 in range(1, c + 1):
        for r2 in range(1, c + 1):
            pair[(r1 * r2) % c] += zh[r1 - 1] * zh[r2 - 1]
    series = np.zeros(nodes, dtype=complex)
    for t in range(c):
        for r3 in range(1, c + 1):
            twist = np.exp(2j * math.pi * ((abar * t * r3) % c) / c)
            series += twist * pair[t] * zh[r3 - 1]
    series *= np.exp(-3.0 * s_circle * math.log(c))
    integrand = np.asarray(mell(s_circle), dtype=complex) * series
    return complex(rho * np.mean(integrand * np.exp(1j * theta)))


# Beyond this multiple of the reciprocal support scale the fitted ladders
# are accurate to a few 1e-6 relative (measured by scripts/fit_voronoi_
# order2.py, including transfer to a differently shaped bump).
_TAIL_XLO = 3.0e3
_TAIL_REL = 5.0e-6


def _tail_asymptotic(spec: VoronoiKernelSpec, xs: np.ndarray):
    """Both transforms on an ascending grid via the fitted ladders.

    Used for x * support_lo >= _TAIL_XLO, where exact contour kernels are
    expensive (their height budget grows with ln x) and the fitted
    oscillatory expansions are already several digits accurate.  Evaluates
    in geometric blocks so each block's quadrature grid is sized by its own
    fastest phase, and reuses the phase matrix across ladder rungs and both
    transform orders.  Returns (order0, order1) complex arrays.
    """
    lo, hi = spec.support
    phi = spec.test_function
    out0 = np.empty(xs.size, dtype=complex)
    out1 = np.empty(xs.size, dtype=complex)
    ladder0 = ((0.0, -2.0 / math.sqrt(3.0 * math.pi)), ORDER2_FITTED)
    start = 0
    while start < xs.size:
        stop = int(np.searchsorted(xs, 2.0 * xs[start], side="right"))
        stop = max(stop, min(start + 512, xs.size))
        stop = min(stop, start + 2048)  # bound the phase-matrix footprint
        blk = xs[start:stop]
        # 12-node panels spanning <= 1.8 periods of the fastest oscillation,
        # floored fine enough to resolve the bump's exp ramps even when the
        # phase is slow (the ramps, not the oscillation, set the bandwidth
        # near the lower end of the ladder regime)
        freq = blk[-1] ** (1.0 / 3.0) * lo ** (-2.0 / 3.0)
        width = min((hi - lo) / 24.0, 1.8 / freq)
        n_panels = max(1, int(math.ceil((hi - lo) / width)))
        y, w = gauss_legendre_panels(lo, hi, n_panels, 12)
        wphi = w * np.asarray(phi(y), dtype=float)
        xy_cbrt = np.cbrt(np.outer(blk, y))
        cbrt = math.pi * xy_cbrt  # (pi^3 x y)^{1/3}
        phase = np.exp(6j * math.pi * xy_cbrt)
        acc0 = np.zeros(blk.size, dtype=complex)
        amp = phase / cbrt
        for j, (c_j, d_j) in enumerate(ladder0, start=1):
            if c_j != 0.0 or d_j != 0.0:
                acc0 += complex(c_j, -d_j) * (amp @ wphi)
            amp = amp / cbrt
        acc1 = np.zeros(blk.size, dtype=complex)
        amp = phase * cbrt * cbrt
        for j, (c_j, d_j) in enumerate(PHI1_FITTED, start=1):
            if c_j != 0.0 or d_j != 0.0:
                acc1 += complex(c_j, -d_j) * (amp @ (wphi / y))
            amp = amp / cbrt
        out0[start:stop] = 2.0 * math.pi**4 * blk * 1j * acc0.real
        out1[start:stop] = 2.0 * math.pi**4 * blk * 1j * acc1.real
        start = stop
    return out0, out1


def voronoi_residual_profile(
    form: GL3Form,
    n: int,
    a: int,
    c: int,
    phi: Callable,
    m2_cutoffs: Sequence[int],
    threads: int = 4,
) -> list:
    """voronoi_sides at several m2 cutoffs, sharing one pair of kernels.

    The transforms dominate the cost and depend on the cutoff only through
    the largest argument, so the profile computes them once at the largest
    cutoff and assembles each truncation from partial sums.  Transform
    arguments below the fitted-ladder regime (x * support_lo < _TAIL_XLO)
    use exact contour kernels at the modulus-neutral abscissae; the far
    tail uses _tail_asymptotic.  For the polar form the dual side includes
    the residue term from polar_main_term.  Returns one VoronoiSides per
    cutoff, in the given order.
    """
    if n < 1 or c < 1:
        raise ValueError("need n >= 1 and c >= 1")
    cutoffs = [int(m) for m in m2_cutoffs]
    if not cutoffs or min(cutoffs) < 4:
        raise ValueError("m2 cutoffs must all be at least 4")
    abar = int(mod_inverse(a, c).value)  # raises NotCoprimeError unless gcd = 1
    spec = VoronoiKernelSpec(form=form, test_function=phi)
    lo, hi = spec.support
    top = max(cutoffs)

    # left side: finitely many integer samples inside the support
    ms = np.arange(max(1, int(math.floor(lo))), int(math.ceil(hi)) + 1)
    row = coefficient_block(form, n, int(ms[-1]))
    phases = np.exp(2j * math.pi * abar * ms / c)
    lhs = complex(np.sum(row[ms] * phases * np.asarray(phi(ms.astype(float)), dtype=complex)))

    polar = polar_main_term(form, n, a, c, phi, (lo, hi)) if form.polar else 0j

    # right side: exact contour kernels (one per order, modulus-neutral
    # abscissae) cover arguments up to the ladder regime; beyond that the
    # fitted expansions take over
    cn = c * n
    m1s = [d for d in range(1, cn + 1) if cn % d == 0]
    m2s = np.arange(1, top + 1)
    # the fitted tail ladders are specific to the parameter-free degenerate
    # form; other forms keep exact contour kernels for every argument
    degenerate = all(abs(z) < 1e-12 for z in spec.spherical())
    x_exact = _TAIL_XLO / lo if degenerate else math.inf
    exact_lns = []
    for m1 in m1s:
        if degenerate:
            m2_edge = min(top, max(1, int(x_exact * c**3 * n / (m1 * m1))))
        else:
            m2_edge = top
        for m2 in (1, m2_edge):
            exact_lns.append(abs(math.log(math.pi**3 * m1 * m1 * m2 / (c**3 * n))))
    max_ln = max(exact_lns)
    kerns = ordered_parallel_map(
        lambda k: _phi_contour_kernel(spec, k, "direct", max_ln, _neutral_abscissa(spec, k)),
        (0, 1),
        threads=min(threads, 2),
    )

    def block(m1: int):
        q, rem = divmod(n * c, m1)
        if rem:  # unreachable for true divisors; guards corrupted input
            raise ValueError(f"modulus n c / m1 must be integral, got remainder {rem}")
        xs = m2s * m1 * m1 / (c**3 * n)
        n_exact = int(np.searchsorted(xs, x_exact, side="right"))
        phi0 = np.empty(top, dtype=complex)
        phi1 = np.empty(top, dtype=complex)
        err0 = np.zeros(top)
        err1 = np.zeros(top)
        if n_exact:
            ys = math.pi**3 * xs[:n_exact]
            phi0[:n_exact] = 2j * math.pi * _apply_chunked(kerns[0], ys)
            phi1[:n_exact] = 2j * math.pi * _apply_chunked(kerns[1], ys)
            err0[:n_exact] = 2.0 * math.pi * kerns[0].tail_estimate * ys ** (-kerns[0].sigma)
            err1[:n_exact] = 2.0 * math.pi * kerns[1].tail_estimate * ys ** (-kerns[1].sigma)
        if n_exact < top:
            t0, t1 = _tail_asymptotic(spec, xs[n_exact:])
            phi0[n_exact:] = t0
            phi1[n_exact:] = t1
            err0[n_exact:] = _TAIL_REL * np.abs(t0)
            err1[n_exact:] = _TAIL_REL * np.abs(t1)
        mixmag = (c**3 * n) / (math.pi**3 * m1 * m1 * m2s)
        mix = mixmag / 1j
        coeffs = coefficient_block(form, m1, top)[1:]
        table_p = np.array([kloosterman(n * a, r, q) for r in range(q)])
        table_m = np.array([kloosterman(n * a, -r, q) for r in range(q)])
        res = m2s % q
        s_plus, s_minus = table_p[res], table_m[res]
        base = coeffs / (m1 * m2s)
        terms = base * (s_plus * (phi0 + mix * phi1) + s_minus * (phi0 - mix * phi1))
        errs = np.abs(base) * (np.abs(s_plus) + np.abs(s_minus)) * (err0 + mixmag * err1)
        return terms, errs

    blocks = ordered_parallel_map(block, m1s, threads=threads)
    pref = c * math.pi ** (-2.5) / 4j
    out = []
    for cut in cutoffs:
        rhs = polar + pref * sum(np.sum(b[:cut]) for b, _ in blocks)
        last_dyad = sum(float(np.sum(np.abs(b[cut // 2 : cut]))) for b, _ in blocks)
        quad_err = sum(float(np.sum(e[:cut])) for _, e in blocks)
        tail = abs(pref) * (2.0 * last_dyad + quad_err)
        out.append(
            VoronoiSides(
                lhs=lhs,
                rhs=complex(rhs),
                truncation=TruncationRecord(cut, tail),
                main_term=polar,
            )
        )
    return out


def voronoi_sides(
    form: GL3Form,
    n: int,
    a: int,
    c: int,
    phi: Callable,
    m2_cutoff: int,
    threads: int = 4,
) -> VoronoiSides:
    """Both sides of the dual-sum identity with the twist e(m abar / c).

    LHS: sum over the integers in phi's support of A(n, m) e(m abar / c)
    phi(m), exact coefficients.  RHS: the m1 | cn, m2 <= m2_cutoff double
    sum with prefactor c pi^{-5/2} / (4i), plus the polar residue term for
    the degenerate form (polar_main_term; zero for cuspidal forms).  The
    tail estimate is twice the mass of the last included dyadic m2 block
    (empirical bound on the super-polynomially decaying remainder) plus
    the accumulated transform quadrature allowances.
    """
    return voronoi_residual_profile(form, n, a, c, phi, [m2_cutoff], threads=threads)[0]
