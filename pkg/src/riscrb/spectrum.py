"""Limiting eigenvalue densities of the normalized information kernel.

In the proportional regime K/N -> c1, R/N -> c2 the spectrum of
(1/N^4) D^H D approaches a deterministic law found by composing the
N-transforms of its three factors.  For unit-modulus coefficients the
Stieltjes transform m(z) solves the quadratic

    a2 m^2 + a1 m + a0 = 0,
    a2 = -c1 z^2 + 3 c1 z^3,  a1 = (c2 - c1) z + (6 c1 - 3) z^2,
    a0 = (3 c1 - 3) z,

and for a binary-amplitude surface it solves a degree-5 polynomial obtained
by clearing denominators in

    c1 (1 + z m) + p x^2 / (W - x^2) + (1 - p) y^2 / (W - y^2) = 0,
    W = -3 (1 - c1 - c1 z m)^2 / (c1 m (c2 - c1 - c1 z m)).

The binary-amplitude relation printed in the source derivation drops a
factor 3 and a sign; the form above is re-derived from the underlying
integral equation and degenerates exactly to the quadratic at x = y = 1
(checked in the test suite, symbolically and numerically).

The density follows from the boundary values mu(l) = Im m(l + j y) / pi for
small y > 0, with the physical branch selected by the upper-half-plane
(Herglotz) property plus continuity along the sweep.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .model import (
    ConstantModulusUniformPhase,
    DiscreteAmplitude,
    DiscretePhase,
    manifold_derivative,
    sensor_manifold,
    substream,
    wrap_angle,
)

__all__ = [
    "SpectralModel",
    "DensityCurve",
    "StieltjesValue",
    "SpectralCrb",
    "FactorTransforms",
    "BranchFailureError",
    "RootSelectionError",
    "NormalizationError",
    "ConvergenceError",
    "DivergentCrbError",
    "SeparationError",
    "quadratic_coefficients",
    "quintic_coefficients",
    "stieltjes_constant_modulus",
    "stieltjes_discrete_amplitude",
    "density_curve",
    "empirical_spectrum",
    "idealized_factor_spectrum",
    "asymptotic_crb_total",
    "analytic_factor_transforms",
]

DENSITY_THRESHOLD = 1e-6
MASS_TOL = 5e-3


class BranchFailureError(RuntimeError):
    """Neither quadratic root lies in the upper half-plane."""

    def __init__(self, z, roots):
        self.z = z
        self.roots = roots
        super().__init__(f"no upper-half-plane root at z={z}: roots {roots}")


class RootSelectionError(RuntimeError):
    """No admissible (upper half-plane, small-residual) degree-5 root."""

    def __init__(self, z, roots, residuals):
        self.z = z
        self.roots = roots
        self.residuals = residuals
        super().__init__(
            f"no admissible root at z={z}: roots {roots}, residuals {residuals}"
        )


class NormalizationError(RuntimeError):
    """Density mass deviates from 1 beyond tolerance (missed support or atom)."""


class ConvergenceError(RuntimeError):
    """Density is not converged in the boundary offset y."""


class DivergentCrbError(RuntimeError):
    """Spectral support reaches zero; the 1/lambda integral diverges."""


class SeparationError(ValueError):
    """Scenario angles violate the minimum angular-separation requirement."""


@dataclass(frozen=True)
class SpectralModel:
    """Large-system limit: target ratio c1 = K/N, sensor ratio c2 = R/N."""

    c1: float
    c2: float
    ris: object = None

    def __post_init__(self):
        if self.ris is None:
            object.__setattr__(self, "ris", ConstantModulusUniformPhase())
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if self.c1 >= self.c2:
            warnings.warn(
                "c1 >= c2 (at least as many targets as sensors): the bound "
                "integral may be ill-posed",
                stacklevel=2,
            )
        if not isinstance(self.ris, (ConstantModulusUniformPhase, DiscretePhase, DiscreteAmplitude)):
            raise ValueError("unsupported coefficient model")

    @property
    def constant_modulus(self):
        return not isinstance(self.ris, DiscreteAmplitude)


@dataclass(frozen=True)
class StieltjesValue:
    """Transform value m at a point z of the upper half-plane."""

    z: complex
    m: complex

    def __post_init__(self):
        if self.z.imag > 0 and self.m.imag <= -1e-12 * max(1.0, abs(self.m)):
            raise ValueError(f"non-Herglotz value m={self.m} at z={self.z}")


@dataclass
class DensityCurve:
    """Sampled limiting density with detected support and total mass."""

    lambdas: np.ndarray
    density: np.ndarray
    support: tuple
    mass: float
    y_offset: float


@dataclass(frozen=True)
class SpectralCrb:
    """Bound integral in both normalizations of the spectral measure."""

    per_target: float
    total: float


def quadratic_coefficients(z, model):
    """(a2, a1, a0) of the unit-modulus branch equation; vectorized in z."""
    c1, c2 = model.c1, model.c2
    z = np.asarray(z, dtype=complex)
    a2 = -c1 * z**2 + 3 * c1 * z**3
    a1 = (c2 - c1) * z + (6 * c1 - 3) * z**2
    a0 = (3 * c1 - 3) * z
    return a2, a1, a0


def _quadratic_roots(z, model):
    a2, a1, a0 = quadratic_coefficients(z, model)
    disc = np.sqrt(a1 * a1 - 4.0 * a2 * a0)
    return (-a1 + disc) / (2.0 * a2), (-a1 - disc) / (2.0 * a2)


def _constant_modulus_grid(z, model):
    """Upper-half-plane quadratic branch, vectorized; no validation."""
    r1, r2 = _quadratic_roots(z, model)
    return np.where(r1.imag >= r2.imag, r1, r2)


def stieltjes_constant_modulus(z, model):
    """Transform of the unit-modulus law at one z with Im z > 0."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("require Im z > 0")
    r1, r2 = _quadratic_roots(np.asarray([z]), model)
    r1, r2 = complex(r1[0]), complex(r2[0])
    m = r1 if r1.imag >= r2.imag else r2
    if m.imag <= 0:
        raise BranchFailureError(z, (r1, r2))
    a2, a1, a0 = quadratic_coefficients(z, model)
    residual = abs(a2 * m * m + a1 * m + a0)
    scale = max(abs(a2), abs(a1), abs(a0))
    if residual > 1e-10 * scale:
        raise BranchFailureError(z, (r1, r2))
    return StieltjesValue(z=z, m=m)


def quintic_coefficients(z, model):
    """Ascending coefficients (length 6) of the binary-amplitude polynomial."""
    c1, c2 = model.c1, model.c2
    ris = model.ris
    x2, y2, p = ris.x**2, ris.y**2, ris.p
    a = np.array([1.0 - c1, -c1 * z])                    # 1 - c1 - c1 z m
    n_w = 3.0 * npoly.polymul(a, a)
    d_w = np.array([0.0, c1 * (c1 - c2), c1**2 * z])     # c1 m (c1 z m + c1 - c2)
    p_x = npoly.polysub(n_w, x2 * d_w)
    p_y = npoly.polysub(n_w, y2 * d_w)
    lead = np.array([-c1, -c1 * z])                      # c1 * psi = -c1 (1 + z m)
    poly = npoly.polymul(lead, npoly.polymul(p_x, p_y))
    poly = npoly.polysub(poly, p * x2 * npoly.polymul(d_w, p_y))
    poly = npoly.polysub(poly, (1.0 - p) * y2 * npoly.polymul(d_w, p_x))
    out = np.zeros(6, dtype=complex)
    out[: len(poly)] = poly
    return out


def _rational_residual(m, z, model):
    """Residual of the defining binary-amplitude relation, scale-normalized."""
    c1, c2 = model.c1, model.c2
    ris = model.ris
    x2, y2, p = ris.x**2, ris.y**2, ris.p
    w = -3.0 * (1.0 - c1 - c1 * z * m) ** 2 / (c1 * m * (c2 - c1 - c1 * z * m))
    t1 = c1 * (1.0 + z * m)
    t2 = p * x2 / (w - x2)
    t3 = (1.0 - p) * y2 / (w - y2)
    scale = max(1.0, abs(t1), abs(t2), abs(t3))
    return abs(t1 + t2 + t3) / scale


def _quintic_candidates(z, model, residual_tol=1e-9):
    roots = npoly.polyroots(quintic_coefficients(z, model))
    residuals = np.array([_rational_residual(m, z, model) for m in roots])
    keep = (roots.imag > -1e-11 * np.maximum(1.0, np.abs(roots))) & (residuals <= residual_tol)
    return roots, residuals, keep


def _descend_to(z, model, im_start=10.0, steps=60):
    """Track the physical branch from high Im(z) (where m ~ -1/z) down to z."""
    path = np.geomspace(im_start, z.imag, steps)
    m = None
    for im in path:
        zz = complex(z.real, im)
        roots, residuals, keep = _quintic_candidates(zz, model)
        if not keep.any():
            raise RootSelectionError(zz, roots, residuals)
        cand = roots[keep]
        target = -1.0 / zz if m is None else m
        m = cand[np.argmin(np.abs(cand - target))]
    return complex(m)


def stieltjes_discrete_amplitude(z, model, hint=None):
    """Transform of the binary-amplitude law at one z with Im z > 0.

    Root selection: upper half-plane and small residual of the defining
    rational relation; among admissible roots, the one continuous with
    ``hint`` (or with the high-Im tail branch when no hint is given).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("require Im z > 0")
    roots, residuals, keep = _quintic_candidates(z, model)
    if not keep.any():
        raise RootSelectionError(z, roots, residuals)
    cand = roots[keep]
    if hint is None:
        hint = _descend_to(z, model)
    m = complex(cand[np.argmin(np.abs(cand - hint))])
    return StieltjesValue(z=z, m=m)


def _transform_grid(lambdas, model, y_offset):
    """m(l + j y) on an ascending grid, tracking the physical branch."""
    z = lambdas + 1j * y_offset
    if model.constant_modulus:
        return _constant_modulus_grid(z, model)
    out = np.empty(len(lambdas), dtype=complex)
    prev = _descend_to(z[0], model)
    for i, zz in enumerate(z):
        roots, residuals, keep = _quintic_candidates(zz, model)
        if not keep.any():
            raise RootSelectionError(zz, roots, residuals)
        cand = roots[keep]
        prev = cand[np.argmin(np.abs(cand - prev))]
        out[i] = prev
    return out


def _density_on(lambdas, model, y_offset):
    im = _transform_grid(lambdas, model, y_offset).imag
    if np.any(im / np.pi < -1e-9):
        raise BranchFailureError(lambdas[np.argmin(im)], None)
    return np.maximum(im, 0.0) / np.pi


def _scale_hint(model):
    """Rough spectral scale: mean eigenvalue of the limiting law is e1*c2/3."""
    return model.ris.moments().e1 * model.c2 / 3.0


def _auto_bracket(model, y_offset):
    """Expand a coarse interval until the density falls below threshold."""
    scale = _scale_hint(model)
    lo, hi = scale * 1e-3, scale * 8.0
    for _ in range(60):
        if _density_on(np.array([hi]), model, y_offset)[0] < DENSITY_THRESHOLD:
            break
        hi *= 2.0
    for _ in range(60):
        if _density_on(np.array([lo]), model, y_offset)[0] < DENSITY_THRESHOLD:
            break
        lo *= 0.5
        if lo < 1e-13:
            break
    return lo, hi


def density_curve(model, grid_spec=None, y_offset=1e-6, check_convergence=True):
    """Limiting density on a grid, with support, mass, and convergence checks.

    Parameters
    ----------
    grid_spec : optional (lo, hi, n_points); auto-bracketed when omitted
    y_offset : boundary offset y in mu(l) = Im m(l + j y) / pi
    check_convergence : also evaluate at y/2 and require L1 change < 1e-3

    Raises NormalizationError when the mass misses 1 by more than 5e-3 and
    ConvergenceError when the boundary limit has not stabilized.
    """
    if y_offset <= 0:
        raise ValueError("y_offset must be positive")
    if grid_spec is None:
        lo, hi = _auto_bracket(model, y_offset)
        n_points = 4000
    else:
        lo, hi, n_points = grid_spec
    lambdas = np.linspace(lo, hi, int(n_points))
    density = _density_on(lambdas, model, y_offset)
    mass = float(np.trapezoid(density, lambdas))
    if abs(mass - 1.0) > MASS_TOL:
        raise NormalizationError(
            f"density mass {mass:.5f} deviates from 1 by more than {MASS_TOL}; "
            "support may be missed or the law carries an atom"
        )
    if check_convergence:
        density_half = _density_on(lambdas, model, y_offset / 2.0)
        l1 = float(np.trapezoid(np.abs(density - density_half), lambdas))
        if l1 > 1e-3:
            raise ConvergenceError(
                f"L1 change {l1:.2e} when halving y_offset={y_offset:g}; "
                "decrease y_offset or refine the grid"
            )
    above = lambdas[density > DENSITY_THRESHOLD]
    support = (float(above[0]), float(above[-1])) if len(above) else (np.nan, np.nan)
    return DensityCurve(
        lambdas=lambdas, density=density, support=support, mass=mass, y_offset=y_offset
    )


def _min_circular_separation(angles):
    if len(angles) < 2:
        return np.inf
    a = np.sort(np.asarray(angles))
    gaps = np.diff(a, append=a[0] + 2 * np.pi)
    return float(gaps.min())


def empirical_spectrum(scenario, seed, separation_factor=4.0):
    """Eigenvalues of the normalized kernel (1/N^4) D^H D for one draw.

    The scenario's targets and sensors must be mutually separated by at
    least ``separation_factor`` beamwidths (2*pi/N); tight packings are the
    regime where the closed-form law is known to degrade.
    """
    N = scenario.n_elements
    min_sep = separation_factor * 2.0 * np.pi / N
    for name, angles in (("thetas", scenario.thetas), ("phis", scenario.phis)):
        got = _min_circular_separation(angles)
        if got < min_sep:
            raise SeparationError(
                f"{name} separation {got:.3e} rad below required {min_sep:.3e} "
                f"({separation_factor} beamwidths at N={N})"
            )
    omega = scenario.ris.sample(N, substream(seed, 0))
    adot = manifold_derivative(scenario.thetas, N)
    aphi = sensor_manifold(scenario.phis, N)
    d = (aphi * omega[None, :]) @ adot / float(N) ** 2
    ev = np.linalg.eigvalsh(d.conj().T @ d)
    return np.maximum(ev.real, 0.0)


def idealized_factor_spectrum(model, n_elements, seed):
    """One spectrum draw from the ensemble where the factor laws are exact.

    The sensor manifold uses Fourier-grid frequencies (its Gram is exactly
    N times a rank-R projection) and the derivative factor is replaced by
    sqrt(N^3/3) times a Haar isometry, which realizes the point-mass factor
    law that the closed-form density assumes.  Useful as an oracle for the
    transform solvers; steering-vector geometry at proportional K/N deviates
    from that idealization (see README).
    """
    N = int(n_elements)
    K = int(round(model.c1 * N))
    R = int(round(model.c2 * N))
    rng = substream(seed, 1)
    idx = np.sort(rng.choice(N, size=R, replace=False))
    phis = wrap_angle(2.0 * np.pi * idx / N)
    aphi = sensor_manifold(phis, N)
    g = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
    v, _ = np.linalg.qr(g)
    b = (float(N) ** 1.5 / np.sqrt(3.0)) * v
    omega = model.ris.sample(N, rng)
    d = (aphi * omega[None, :]) @ b / float(N) ** 2
    ev = np.linalg.eigvalsh(d.conj().T @ d)
    return np.maximum(ev.real, 0.0)


def asymptotic_crb_total(model, sigma2, n_slots, n_elements, n_targets, curve=None, y_offset=1e-10):
    """Spectral bound sigma^2/(2 T N^4) * integral(1/l) d mu, both conventions.

    ``per_target`` integrates against the probability-normalized spectral
    law; ``total`` multiplies by the number of targets (the trace
    convention).  The support must stay away from zero.
    """
    if curve is None:
        curve = density_curve(model, y_offset=y_offset)
    lo = curve.support[0]
    if not np.isfinite(lo) or lo < 1e-12:
        raise DivergentCrbError(
            f"support lower edge {lo!r} reaches zero; 1/lambda integral diverges"
        )
    inside = curve.lambdas >= lo
    integral = float(
        np.trapezoid(curve.density[inside] / curve.lambdas[inside], curve.lambdas[inside])
    )
    base = sigma2 / (2.0 * n_slots * float(n_elements) ** 4)
    return SpectralCrb(per_target=base * integral, total=base * integral * n_targets)


@dataclass(frozen=True)
class FactorTransforms:
    """Closed-form N-transform evaluators of the three spectral factors.

    Each evaluator takes the transform's own argument.  ``ris_psi`` is the
    forward psi-transform of the coefficient-law factor; composing the chain
    and checking psi_ris(z / chain_prefix) = c1 * psi closes the loop
    against the polynomial solvers.
    """

    derivative_n: callable
    sensor_n: callable
    ris_n: callable
    ris_psi: callable
    model: SpectralModel

    def chain_mismatch(self, z, m):
        """|psi_ris(z/G) - c1 psi| for a claimed transform value m at z."""
        c1 = self.model.c1
        psi = -1.0 - z * m
        g = (c1 * psi / (1.0 + c1 * psi)) ** 2 * self.derivative_n(psi) * self.sensor_n(
            (self.model.c1 / self.model.c2) * psi
        )
        return abs(self.ris_psi(z / g) - c1 * psi)


def analytic_factor_transforms(model):
    """The three factor N-transforms plus the forward coefficient transform."""

    def derivative_n(w):
        # point mass at 1/3: (1 + w) / (3 w)
        return (1.0 + w) / (3.0 * w)

    def sensor_n(w):
        # point mass at 1: (1 + w) / w
        return (1.0 + w) / w

    if model.constant_modulus:

        def ris_n(w):
            return (1.0 + w) / w

        def ris_psi(zeta):
            return 1.0 / (zeta - 1.0)

    else:
        ris = model.ris
        x2, y2, p = ris.x**2, ris.y**2, ris.p
        e1 = p * x2 + (1 - p) * y2

        def ris_psi(zeta):
            return p * x2 / (zeta - x2) + (1.0 - p) * y2 / (zeta - y2)

        def ris_n(w):
            # invert ris_psi: w z^2 - (w (x2+y2) + e1) z + (w + 1) x2 y2 = 0;
            # both roots are preimages, so take the branch that behaves like
            # e1/w as w -> 0 (the one entering the composition chain)
            a = w
            b = -(w * (x2 + y2) + e1)
            c = (w + 1.0) * x2 * y2
            disc = np.sqrt(b * b - 4.0 * a * c + 0j)
            z1 = (-b + disc) / (2.0 * a)
            z2 = (-b - disc) / (2.0 * a)
            return z1 if abs(z1) >= abs(z2) else z2

    return FactorTransforms(
        derivative_n=derivative_n,
        sensor_n=sensor_n,
        ris_n=ris_n,
        ris_psi=ris_psi,
        model=model,
    )
