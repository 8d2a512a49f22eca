"""Leading-order information and bound entries for a large aperture.

With N reflecting elements, the (i, i) information entry grows like N^4 when
some sensor mirrors the target (exists r with theta_i + phi_r = 0) and like
N^3 otherwise:

    F_ii ~ rho_i * (T e2 / 2) * N^4                  mirrored
    F_ii ~ rho_i * (2 T (e1 - e2) R / 3) * N^3       otherwise

For uncorrelated signals the bound is the reciprocal, giving the N^-4 / N^-3
decay laws.  Note the constants depend only on (rho, T, e1, e2, R) and the
regime tag, never on the specific angle values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ris_moments, wrap_angle

__all__ = [
    "AsymptoticRegime",
    "DegenerateRegimeError",
    "detect_regime",
    "asymptotic_fisher_entry",
    "asymptotic_crb_entry",
    "cosine_sum_leading",
    "squared_index_sum",
]


class DegenerateRegimeError(ValueError):
    """The mirrored-geometry leading term vanishes (e2 = 0); N^3 law governs."""


@dataclass(frozen=True)
class AsymptoticRegime:
    """Per-target regime tag; matched_sensor is set when symmetric."""

    symmetric: bool
    matched_sensor: int | None = None


def detect_regime(scenario, tol=1e-9):
    """Classify each target as mirrored (symmetric) or not, modulo 2*pi.

    A target i is symmetric when min_r |wrap(theta_i + phi_r)| <= tol.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    out = []
    for theta in scenario.thetas:
        gaps = np.abs(wrap_angle(theta + scenario.phis))
        r = int(np.argmin(gaps))
        if gaps[r] <= tol:
            out.append(AsymptoticRegime(symmetric=True, matched_sensor=r))
        else:
            out.append(AsymptoticRegime(symmetric=False))
    return out


def asymptotic_fisher_entry(i, scenario, regime):
    """Leading-order F_ii for target i under the given regime tag."""
    mom = ris_moments(scenario.ris)
    rho = scenario.snr()[i]
    T = scenario.n_slots
    N = scenario.n_elements
    R = scenario.n_sensors
    if regime.symmetric:
        if mom.e2 <= 0.0:
            raise DegenerateRegimeError(
                "symmetric regime with e2 = 0: the N^4 coefficient vanishes "
                "and the N^3 law governs"
            )
        return rho * (T * mom.e2 / 2.0) * float(N) ** 4
    return rho * (2.0 * T * (mom.e1 - mom.e2) * R / 3.0) * float(N) ** 3


def asymptotic_crb_entry(i, scenario, regime):
    """Leading-order bound for target i; uncorrelated signals only."""
    if scenario.signal_model != "uncorrelated-diagonal":
        raise ValueError("the closed-form bound holds for uncorrelated signals only")
    mom = ris_moments(scenario.ris)
    rho = scenario.snr()[i]
    T = scenario.n_slots
    N = scenario.n_elements
    R = scenario.n_sensors
    if regime.symmetric:
        if mom.e2 <= 0.0:
            raise DegenerateRegimeError(
                "symmetric regime with e2 = 0: the N^4 coefficient vanishes "
                "and the N^3 law governs"
            )
        return 2.0 / (rho * T * mom.e2) * float(N) ** -4
    diff = mom.e1 - mom.e2
    if diff <= 0.0:
        raise DegenerateRegimeError(
            "deterministic coefficients (e1 = e2): the N^3 leading term vanishes"
        )
    return 3.0 / (2.0 * T * rho * diff * R) * float(N) ** -3


def cosine_sum_leading(psi, n):
    """Leading term of sum_{n1,n2} n1 n2 cos((n2 - n1) psi): N^2 / (4 sin^2(psi/2)).

    Undefined at psi = 0 (mod 2*pi); use squared_index_sum for that branch.
    """
    if abs(float(wrap_angle(psi))) < 1e-15:
        raise ZeroDivisionError("psi = 0 mod 2*pi: use the squared_index_sum branch")
    s = np.sin(psi / 2.0)
    return float(n) ** 2 / (4.0 * s * s)


def squared_index_sum(n):
    """Exact sum_{k=1}^{n-1} k^2 = (n-1) n (2n-1) / 6."""
    n = int(n)
    return (n - 1) * n * (2 * n - 1) // 6
