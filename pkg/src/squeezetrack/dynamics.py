"""Ground-truth particle motion.

Trapped Brownian motion is an Ornstein-Uhlenbeck process sampled with its
exact one-step transition.  Free (sub)diffusion with MSD ``2 D tau**alpha`` is
fractional Brownian motion with Hurst exponent ``alpha / 2``; its increments
(fractional Gaussian noise) come from circulant embedding of the increment
covariance, with a dense Cholesky factorization as fallback and oracle.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import linalg, signal

from squeezetrack.errors import DomainError
from squeezetrack.rng import make_rng, rng_metadata

K_B = 1.380649e-23  # J/K

# relative size of a negative circulant eigenvalue still treated as rounding
_EIG_TOL = 1e-10


@dataclass(frozen=True)
class TrapParams:
    stiffness: float  # N/m
    drag: float  # kg/s
    temperature: float  # K

    def __post_init__(self):
        for name in ("stiffness", "drag", "temperature"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def relaxation_time(self):
        return self.drag / self.stiffness

    @property
    def corner_frequency(self):
        return self.stiffness / (2 * math.pi * self.drag)

    @property
    def position_variance(self):
        return K_B * self.temperature / self.stiffness

    @property
    def diffusion_constant(self):
        return K_B * self.temperature / self.drag


@dataclass(frozen=True)
class DiffusionSpec:
    diffusion_constant: float  # m^2 / s^alpha
    alpha: float

    def __post_init__(self):
        if not (self.diffusion_constant > 0) or not math.isfinite(self.diffusion_constant):
            raise DomainError(f"diffusion_constant must be finite and > 0, got {self.diffusion_constant!r}")
        if not (0 < self.alpha < 2):
            raise DomainError(f"alpha must be in (0, 2), got {self.alpha!r}")

    @property
    def hurst(self):
        return self.alpha / 2


@dataclass
class Trajectory:
    """Uniformly sampled positions in metres, ``positions[k]`` at ``t0 + k*dt``."""

    positions: np.ndarray
    dt: float
    seed: int = 0
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 1 or self.positions.size < 2:
            raise DomainError("a trajectory needs a 1-D array of at least 2 positions")
        if not (self.dt > 0) or not math.isfinite(self.dt):
            raise DomainError(f"dt must be finite and > 0, got {self.dt!r}")
        if not np.all(np.isfinite(self.positions)):
            raise DomainError("trajectory contains non-finite positions")

    def __len__(self):
        return self.positions.size

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.positions.size)

    @property
    def duration(self):
        return self.dt * self.positions.size


def _check_grid(dt, n):
    if not (dt > 0) or not math.isfinite(dt):
        raise DomainError(f"dt must be finite and > 0, got {dt!r}")
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")


def simulate_ou(trap, dt, n, seed, stream=()):
    """Trapped Brownian motion started from the stationary distribution."""
    _check_grid(dt, n)
    n = int(n)
    rng = make_rng(seed, *stream)
    a = math.exp(-dt / trap.relaxation_time)
    var = trap.position_variance
    drive = rng.standard_normal(n)
    drive[0] *= math.sqrt(var)
    # -expm1 keeps precision when dt << relaxation time
    drive[1:] *= math.sqrt(var * -math.expm1(-2 * dt / trap.relaxation_time))
    x = signal.lfilter([1.0], [1.0, -a], drive)
    meta = {"process": "ou", "stiffness": trap.stiffness, "drag": trap.drag,
            "temperature": trap.temperature, **rng_metadata(seed, *stream)}
    return Trajectory(x, dt, seed=int(seed), meta=meta)


def fgn_autocovariance(hurst, lags, variance=1.0):
    """Autocovariance of fractional Gaussian noise at integer ``lags``."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    h2 = 2 * hurst
    return 0.5 * variance * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(n, hurst):
    """Eigenvalues of the minimal (size ``2n``) circulant embedding of ``n`` fGn samples."""
    g = fgn_autocovariance(hurst, np.arange(n + 1))
    return np.fft.fft(np.concatenate([g, g[-2:0:-1]])).real


def fgn_circulant(n, hurst, rng, size=None):
    """Unit-variance fGn of length ``n`` by circulant embedding.

    Returns None if the embedding is not non-negative definite.  ``size``
    draws that many independent rows at once.
    """
    lam = circulant_eigenvalues(n, hurst)
    if lam.min() < -_EIG_TOL * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = lam.size
    shape = (m,) if size is None else (size, m)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    w = np.fft.fft(np.sqrt(lam / m) * z, axis=-1)
    return np.ascontiguousarray(w.real[..., :n])


def fgn_dense(n, hurst, rng, size=None):
    """Unit-variance fGn of length ``n`` from the Cholesky factor of its covariance."""
    cov = linalg.toeplitz(fgn_autocovariance(hurst, np.arange(n)))
    chol = linalg.cholesky(cov, lower=True)
    shape = (n,) if size is None else (size, n)
    z = rng.standard_normal(shape)
    return z @ chol.T


def fgn(n, hurst, rng, method="circulant", size=None):
    if method == "dense":
        return fgn_dense(n, hurst, rng, size=size), "dense"
    if method != "circulant":
        raise DomainError(f"unknown fGn method {method!r}")
    out = fgn_circulant(n, hurst, rng, size=size)
    if out is None:
        warnings.warn(
            f"circulant embedding not non-negative for n={n}, H={hurst}; using dense factorization",
            RuntimeWarning,
            stacklevel=3,
        )
        return fgn_dense(n, hurst, rng, size=size), "dense"
    return out, "circulant"


def simulate_fbm(spec, dt, n, seed, stream=(), method="circulant"):
    """Fractional Brownian motion with ensemble MSD ``2 D tau**alpha``, starting at 0."""
    _check_grid(dt, n)
    n = int(n)
    rng = make_rng(seed, *stream)
    steps, used = fgn(n - 1, spec.hurst, rng, method=method)
    steps *= math.sqrt(2 * spec.diffusion_constant * dt**spec.alpha)
    x = np.empty(n)
    x[0] = 0.0
    np.cumsum(steps, out=x[1:])
    meta = {"process": "fbm", "alpha": spec.alpha, "diffusion_constant": spec.diffusion_constant,
            "fgn_method": used, **rng_metadata(seed, *stream)}
    return Trajectory(x, dt, seed=int(seed), meta=meta)


def simulate_piecewise_alpha(segments, dt, seed, stream=(), method="circulant"):
    """Concatenate independent fBm pieces, each starting where the last ended.

    ``segments`` is a sequence of ``(DiffusionSpec, duration_s)``.  Segment
    ``i`` uses stream ``(*stream, i)``, so a single segment reproduces
    :func:`simulate_fbm` with the same seed.  Zero-duration segments are
    skipped.  ``meta["boundaries"]`` holds the sample index where each kept
    segment starts.
    """
    segments = list(segments)
    if not segments:
        raise DomainError("at least one segment is required")
    if not (dt > 0):
        raise DomainError(f"dt must be > 0, got {dt!r}")
    pieces = [np.zeros(1)]
    boundaries, alphas, durations = [], [], []
    start = 0
    for i, (spec, duration) in enumerate(segments):
        if duration < 0:
            raise DomainError(f"segment {i} has negative duration {duration!r}")
        steps = int(round(duration / dt))
        if steps == 0:
            continue
        piece = simulate_fbm(spec, dt, steps + 1, seed, stream=(*stream, i), method=method).positions
        pieces.append(piece[1:] + pieces[-1][-1])
        boundaries.append(start)
        alphas.append(spec.alpha)
        durations.append(steps * dt)
        start += steps
    if not boundaries:
        raise DomainError("all segments have zero duration")
    x = np.concatenate(pieces)
    meta = {"process": "piecewise_fbm", "boundaries": boundaries, "alphas": alphas,
            "durations": durations, **rng_metadata(seed, *stream)}
    return Trajectory(x, dt, seed=int(seed), meta=meta)


def ou_msd_theory(trap, tau):
    tau = np.asarray(tau, dtype=np.float64)
    return 2 * trap.position_variance * -np.expm1(-tau / trap.relaxation_time)


def ou_psd_theory(trap, f):
    """One-sided Lorentzian displacement PSD, m^2/Hz; integrates to kT/kappa over [0, inf)."""
    f = np.asarray(f, dtype=np.float64)
    fc = trap.corner_frequency
    return K_B * trap.temperature / (math.pi**2 * trap.drag * (fc**2 + f**2))


def fbm_msd_theory(spec, tau):
    return 2 * spec.diffusion_constant * np.asarray(tau, dtype=np.float64) ** spec.alpha
