"""Array geometry, random reflection coefficients, and their moments.

Angles are electrical spatial frequencies: the steering vector of a size-N
uniform linear aperture at spatial frequency theta is
``[1, e^{j theta}, ..., e^{j(N-1) theta}]``, so theta already absorbs
wavelength and element spacing.  The reflecting surface applies one random
coefficient ``omega_n = beta_n * exp(j alpha_n)`` per element, i.i.d. across
elements, and the two moments that matter downstream are

    e1 = E[|omega|^2]        (diagonal of E[omega omega^H])
    e2 = |E[omega]|^2        (off-diagonal of E[omega omega^H])
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = [
    "Moments",
    "ConstantModulusUniformPhase",
    "DiscretePhase",
    "DiscreteAmplitude",
    "Scenario",
    "steering_vector",
    "steering_derivative",
    "manifold",
    "manifold_derivative",
    "sensor_manifold",
    "ris_moments",
    "sample_ris",
    "sigma_matrix",
    "substream",
    "wrap_angle",
]


def wrap_angle(x):
    """Wrap angle(s) to the interval (-pi, pi]."""
    return -((-np.asarray(x) + np.pi) % TWO_PI - np.pi)


def substream(seed, *key):
    """Independent RNG substream for (seed, key) — order-insensitive.

    Each distinct key tuple (e.g. ``(trial, slot)``) yields a stream that is
    independent of every other key, so parallel schedules cannot change
    sampled values.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class Moments:
    """Second moment ``e1`` and squared mean ``e2`` of a reflection coefficient."""

    e1: float
    e2: float

    def __post_init__(self):
        if self.e1 < 0 or self.e2 < 0:
            raise ValueError("moments must be nonnegative")
        if self.e2 > self.e1 + 1e-12:
            raise ValueError(f"e2={self.e2} exceeds e1={self.e1} (Cauchy-Schwarz)")


@dataclass(frozen=True)
class ConstantModulusUniformPhase:
    """Unit-modulus coefficient with phase uniform on (phase_lo, phase_hi)."""

    phase_lo: float = 0.0
    phase_hi: float = TWO_PI

    def __post_init__(self):
        if not (0.0 <= self.phase_lo < self.phase_hi <= TWO_PI):
            raise ValueError("require 0 <= phase_lo < phase_hi <= 2*pi")

    def moments(self) -> Moments:
        # E[e^{j a}] over U(lo, hi) = (e^{j hi} - e^{j lo}) / (j (hi - lo))
        width = self.phase_hi - self.phase_lo
        mean = (np.exp(1j * self.phase_hi) - np.exp(1j * self.phase_lo)) / (1j * width)
        return Moments(e1=1.0, e2=float(abs(mean) ** 2))

    def sample(self, n, rng):
        return np.exp(1j * rng.uniform(self.phase_lo, self.phase_hi, n))


@dataclass(frozen=True)
class DiscretePhase:
    """Unit-modulus coefficient with phase drawn from a finite level set.

    The default is the two-level set {pi/2, -pi/2} with equal probability
    (one PIN diode toggling the sign of the quadrature component).
    """

    phases: tuple = (np.pi / 2, -np.pi / 2)
    probs: tuple = (0.5, 0.5)

    def __post_init__(self):
        phases = tuple(float(p) for p in self.phases)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "probs", probs)
        if len(phases) != len(probs) or not phases:
            raise ValueError("phases and probs must be equal-length and non-empty")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")

    def moments(self) -> Moments:
        mean = np.sum(np.asarray(self.probs) * np.exp(1j * np.asarray(self.phases)))
        return Moments(e1=1.0, e2=float(min(abs(mean) ** 2, 1.0)))

    def sample(self, n, rng):
        idx = rng.choice(len(self.phases), size=n, p=self.probs)
        return np.exp(1j * np.asarray(self.phases)[idx])


@dataclass(frozen=True)
class DiscreteAmplitude:
    """Binary amplitude (x w.p. p, y w.p. 1-p), phase uniform on (0, 2*pi).

    Models a surface where only a random subset of elements reflects toward
    the sensors; p is the reflecting fraction.
    """

    x: float = 1.0
    y: float = 3.0
    p: float = 0.5

    def __post_init__(self):
        if self.x <= 0 or self.y <= 0:
            raise ValueError("amplitudes must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def moments(self) -> Moments:
        # full-circle uniform phase kills the mean regardless of amplitude
        return Moments(e1=self.p * self.x**2 + (1 - self.p) * self.y**2, e2=0.0)

    def sample(self, n, rng):
        amp = np.where(rng.random(n) < self.p, self.x, self.y)
        return amp * np.exp(1j * rng.uniform(0.0, TWO_PI, n))


RisDistribution = (ConstantModulusUniformPhase, DiscretePhase, DiscreteAmplitude)


def ris_moments(dist) -> Moments:
    """Closed-form (e1, e2) of a reflection-coefficient distribution."""
    return dist.moments()


def sample_ris(dist, n, rng_seed):
    """Draw n i.i.d. reflection coefficients; deterministic given the seed.

    ``rng_seed`` may be an integer seed or an existing Generator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return dist.sample(n, rng)


def sigma_matrix(dist, n):
    """Auto-correlation matrix E[omega omega^H]: e1 on the diagonal, e2 off it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mom = dist.moments()
    sig = np.full((n, n), mom.e2, dtype=complex)
    np.fill_diagonal(sig, mom.e1)
    return sig


def steering_vector(theta, n):
    """Aperture response [1, e^{j theta}, ..., e^{j(n-1) theta}]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.exp(1j * np.arange(n) * theta)


def steering_derivative(theta, n):
    """d/d theta of steering_vector: entry k is j*k*e^{j k theta}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return 1j * k * np.exp(1j * k * theta)


def manifold(thetas, n):
    """n x K matrix whose column k is steering_vector(thetas[k], n)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return np.exp(1j * np.outer(np.arange(n), thetas))


def manifold_derivative(thetas, n):
    """n x K matrix whose column k is steering_derivative(thetas[k], n)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    k = np.arange(n)
    return (1j * k)[:, None] * np.exp(1j * np.outer(k, thetas))


def sensor_manifold(phis, n):
    """R x n sensor-side manifold; row r is steering_vector(phis[r], n) transposed.

    Rows are plain transposes (no conjugation), which is what makes the
    favourable mirror geometry a *sum* condition theta + phi = 0.
    """
    return manifold(phis, n).T


@dataclass
class Scenario:
    """One complete bound-evaluation instance.

    Attributes
    ----------
    thetas : array of K target spatial frequencies in (-pi, pi]
    phis : array of R sensor spatial frequencies in (-pi, pi]
    n_elements : N, number of reflecting elements
    n_slots : T, number of observation slots
    powers : K per-target signal powers (linear)
    noise_power : sigma^2 (linear)
    signal_model : "uncorrelated-diagonal" or "coherent-all-one"
    ris : reflection-coefficient distribution
    """

    thetas: np.ndarray
    phis: np.ndarray
    n_elements: int
    n_slots: int
    powers: np.ndarray
    noise_power: float
    signal_model: str = "uncorrelated-diagonal"
    ris: object = field(default_factory=ConstantModulusUniformPhase)

    def __post_init__(self):
        self.thetas = np.atleast_1d(np.asarray(self.thetas, dtype=float))
        self.phis = np.atleast_1d(np.asarray(self.phis, dtype=float))
        self.powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        for name, angles in (("thetas", self.thetas), ("phis", self.phis)):
            if not np.all(np.isfinite(angles)):
                raise ValueError(f"{name} must be finite")
            if np.any(angles <= -np.pi) or np.any(angles > np.pi):
                raise ValueError(f"{name} must lie in (-pi, pi]")
        if self.n_elements < 2:
            raise ValueError("n_elements must be >= 2")
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        if len(self.thetas) < 1 or len(self.phis) < 1:
            raise ValueError("need at least one target and one sensor")
        if len(self.powers) != len(self.thetas):
            raise ValueError("powers must have one entry per target")
        if np.any(self.powers <= 0) or self.noise_power <= 0:
            raise ValueError("powers and noise_power must be positive")
        if self.signal_model not in ("uncorrelated-diagonal", "coherent-all-one"):
            raise ValueError(f"unknown signal_model {self.signal_model!r}")
        if not isinstance(self.ris, RisDistribution):
            raise ValueError("ris must be one of the reflection-coefficient distributions")

    @property
    def n_targets(self):
        return len(self.thetas)

    @property
    def n_sensors(self):
        return len(self.phis)

    def signal_covariance(self):
        """Model covariance R of the per-slot signal vector.

        Diagonal powers for the uncorrelated model; rank-one
        sqrt(p) sqrt(p)^T for the fully coherent model (equal powers give the
        all-one matrix scaled by the common power).
        """
        if self.signal_model == "uncorrelated-diagonal":
            return np.diag(self.powers).astype(complex)
        root = np.sqrt(self.powers)
        return np.outer(root, root).astype(complex)

    def snr(self):
        """Per-target SNR rho_i = p_i / sigma^2."""
        return self.powers / self.noise_power
