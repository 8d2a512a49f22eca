"""Fisher information and Cramer-Rao bounds, exact and in expectation.

For the Gaussian observation y(t) = A_phi Omega(t) A_theta x(t) + noise, the
information matrix for the target spatial frequencies is

    F = (2 / sigma^2) sum_t Re{ X(t)^H D(t)^H D(t) X(t) },
    D(t) = A_phi diag(omega(t)) Adot_theta,   X(t) = diag(x(t)),

and averaging over i.i.d. reflection coefficients with auto-correlation
Sigma gives

    E[F] = (2 T / sigma^2) Re{ (Adot^H ((A_phi^H A_phi) .* Sigma) Adot) .* R^T },

with ``.*`` the entrywise product and R the signal covariance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    manifold_derivative,
    sensor_manifold,
    sample_ris,
    sigma_matrix,
    substream,
)

__all__ = [
    "FisherMatrix",
    "CrbResult",
    "SingularFimError",
    "MonteCarloFailureError",
    "fim_exact",
    "fim_expected",
    "crb_from_fim",
    "monte_carlo_crb",
    "synthesize_signals",
    "draw_slot_coefficients",
]

SINGULAR_CONDITION = 1e12


class SingularFimError(ValueError):
    """Information matrix is numerically singular (unidentifiable parameters)."""

    def __init__(self, condition_number):
        self.condition_number = condition_number
        super().__init__(
            f"Fisher matrix condition number {condition_number:.3e} exceeds "
            f"{SINGULAR_CONDITION:.0e}; parameters are not jointly identifiable"
        )


class MonteCarloFailureError(RuntimeError):
    """More than half of the Monte Carlo trials produced a singular matrix."""


@dataclass
class FisherMatrix:
    """K x K real symmetric information matrix with provenance tag."""

    entries: np.ndarray
    scenario_ref: str = ""

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("entries must be a square matrix")
        scale = max(np.abs(self.entries).max(), 1e-300)
        if np.abs(self.entries - self.entries.T).max() > 1e-10 * scale:
            raise ValueError("entries must be symmetric")


@dataclass
class CrbResult:
    """Diagonal Cramer-Rao bounds with conditioning and sampling metadata."""

    diag: np.ndarray
    condition_number: float
    n_trials: int = 1
    std_err: np.ndarray = field(default=None)
    n_singular: int = 0

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        if self.std_err is None:
            self.std_err = np.zeros_like(self.diag)
        self.std_err = np.asarray(self.std_err, dtype=float)


def fim_exact(scenario, omega_per_slot, signals):
    """Exact information matrix for given per-slot coefficients and signals.

    Parameters
    ----------
    omega_per_slot : (T, N) complex — reflection coefficients per slot
    signals : (T, K) complex — transmitted symbols per slot

    Returns
    -------
    FisherMatrix
    """
    omega = np.asarray(omega_per_slot, dtype=complex)
    x = np.asarray(signals, dtype=complex)
    T, N, K = scenario.n_slots, scenario.n_elements, scenario.n_targets
    if omega.shape != (T, N):
        raise ValueError(f"omega_per_slot must have shape ({T}, {N}), got {omega.shape}")
    if x.shape != (T, K):
        raise ValueError(f"signals must have shape ({T}, {K}), got {x.shape}")

    adot = manifold_derivative(scenario.thetas, N)          # N x K
    aphi = sensor_manifold(scenario.phis, N)                # R x N
    # D(t) = A_phi diag(omega_t) Adot, all slots at once
    d = np.einsum("rn,tn,nk->trk", aphi, omega, adot)
    gram = np.einsum("trk,trl->tkl", d.conj(), d)           # D^H D per slot
    f = (2.0 / scenario.noise_power) * np.real(
        np.einsum("tk,tkl,tl->kl", x.conj(), gram, x)
    )
    f = 0.5 * (f + f.T)  # remove float asymmetry
    return FisherMatrix(entries=f, scenario_ref="exact")


def fim_expected(scenario):
    """Expectation of fim_exact over the reflection coefficients."""
    N = scenario.n_elements
    adot = manifold_derivative(scenario.thetas, N)
    aphi = sensor_manifold(scenario.phis, N)
    sig = sigma_matrix(scenario.ris, N)
    m = (aphi.conj().T @ aphi) * sig
    g = adot.conj().T @ m @ adot
    r = scenario.signal_covariance()
    f = (2.0 * scenario.n_slots / scenario.noise_power) * np.real(g * r.T)
    f = 0.5 * (f + f.T)
    return FisherMatrix(entries=f, scenario_ref="expected")


def crb_from_fim(fisher):
    """Diagonal of the inverse information matrix via symmetric eigensolve.

    Raises SingularFimError when the condition number exceeds 1e12 (or the
    matrix is not positive definite); a singular information matrix means the
    parameters are unidentifiable and no bound exists.
    """
    f = fisher.entries if isinstance(fisher, FisherMatrix) else np.asarray(fisher, dtype=float)
    w, v = np.linalg.eigh(f)
    if w[0] <= 0.0:
        raise SingularFimError(np.inf)
    cond = w[-1] / w[0]
    if cond > SINGULAR_CONDITION:
        raise SingularFimError(cond)
    diag = np.einsum("kj,j,kj->k", v, 1.0 / w, v)
    return CrbResult(diag=diag, condition_number=float(cond))


def synthesize_signals(scenario, seed):
    """Deterministic constant-modulus symbols whose empirical covariance is R.

    Uncorrelated model: each target gets a distinct frequency bin on the
    T-point grid plus a random phase offset, making the slot-averaged
    covariance exactly diag(powers) whenever T >= K (random phases otherwise,
    matching R only on average).  Coherent model: one common random phase per
    slot, which makes the covariance exactly sqrt(p) sqrt(p)^T.
    """
    T, K = scenario.n_slots, scenario.n_targets
    rng = substream(seed, 905)  # signal stream, disjoint from (trial, slot) keys
    root = np.sqrt(scenario.powers)
    t = np.arange(T)
    if scenario.signal_model == "coherent-all-one":
        beta = rng.uniform(0.0, 2 * np.pi, T)
        return np.exp(1j * beta)[:, None] * root[None, :]
    offsets = rng.uniform(0.0, 2 * np.pi, K)
    if T >= K:
        bins = rng.permutation(T)[:K]
        phase = 2 * np.pi * np.outer(t, bins) / T + offsets[None, :]
    else:
        phase = rng.uniform(0.0, 2 * np.pi, (T, K)) + offsets[None, :]
    return np.exp(1j * phase) * root[None, :]


def draw_slot_coefficients(scenario, seed, trial, fixed_ris=False):
    """Per-slot reflection coefficients for one Monte Carlo trial.

    Every (trial, slot) pair owns an independent substream of the master
    seed; with ``fixed_ris`` the slot-0 draw is held for all T slots.
    """
    T, N = scenario.n_slots, scenario.n_elements
    if fixed_ris:
        omega = sample_ris(scenario.ris, N, substream(seed, trial, 0))
        return np.broadcast_to(omega, (T, N)).copy()
    out = np.empty((T, N), dtype=complex)
    for t in range(T):
        out[t] = sample_ris(scenario.ris, N, substream(seed, trial, t))
    return out


def _run_trial(scenario, signals, seed, trial, fixed_ris):
    omega = draw_slot_coefficients(scenario, seed, trial, fixed_ris)
    fisher = fim_exact(scenario, omega, signals)
    try:
        return crb_from_fim(fisher).diag
    except SingularFimError:
        return None


def monte_carlo_crb(scenario, n_trials, seed, fixed_ris=False, workers=1):
    """Monte Carlo mean and standard error of the per-target bounds.

    Coefficients are redrawn every slot (or held per trial with
    ``fixed_ris``); the transmitted symbols are synthesized once per scenario
    from the same master seed.  Singular trials are excluded and counted;
    more than 50 % singular aborts.  The reduction order is fixed by trial
    index, so results are identical for any worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    signals = synthesize_signals(scenario, seed)
    if workers <= 1:
        results = [_run_trial(scenario, signals, seed, tr, fixed_ris) for tr in range(n_trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda tr: _run_trial(scenario, signals, seed, tr, fixed_ris), range(n_trials))
            )
    kept = [r for r in results if r is not None]
    n_singular = n_trials - len(kept)
    if n_singular > n_trials // 2:
        raise MonteCarloFailureError(
            f"{n_singular}/{n_trials} trials had a singular information matrix"
        )
    stack = np.vstack(kept)
    mean = stack.mean(axis=0)
    std_err = (
        stack.std(axis=0, ddof=1) / np.sqrt(len(kept)) if len(kept) > 1 else np.zeros_like(mean)
    )
    # conditioning reported for the mean information matrix of the last trial basis:
    # recompute a representative condition number from the expected matrix
    try:
        cond = crb_from_fim(fim_expected(scenario)).condition_number
    except SingularFimError as err:
        cond = err.condition_number
    return CrbResult(
        diag=mean,
        condition_number=cond,
        n_trials=n_trials,
        std_err=std_err,
        n_singular=n_singular,
    )
