"""Microrheology from position records.

The MSD is the time-averaged estimator over all overlapping pairs.  Its
standard error treats the ``N - k`` squared increments at lag ``k`` as worth
``N / k`` independent samples, which is conservative for overlapping pairs.
Power-law fits are weighted least squares of ``log(msd)`` on ``log(lag)``
with weights ``(msd / stderr)**2``.

MSD values at neighbouring lags share most of their increments, so treating
them as independent makes the slope look about twice as precise as it is.
The reported parameter errors therefore use a sandwich covariance around the
weighted normal equations, with lag-to-lag correlation modelled as
``sqrt(lag_short / lag_long)``.  The naive independent-lag error is kept
alongside for comparison.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg

from squeezetrack.dynamics import Trajectory
from squeezetrack.errors import DegenerateInputError, DomainError
from squeezetrack.quantum_noise import measurement_rate_gain

PLATEAU_CUTOFF = 0.01  # s; trapping plateau negligible below this lag
_GRID_TOL = 1e-9


@dataclass
class MsdCurve:
    lags: np.ndarray  # s
    msd: np.ndarray  # m^2
    stderr: np.ndarray  # m^2
    n_pairs: np.ndarray
    dt: float = None

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.float64)
        self.msd = np.asarray(self.msd, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        self.n_pairs = np.asarray(self.n_pairs, dtype=np.int64)
        if not (self.lags.shape == self.msd.shape == self.stderr.shape == self.n_pairs.shape):
            raise DomainError("lags, msd, stderr and n_pairs must have the same length")
        if np.any(np.diff(self.lags) <= 0):
            raise DomainError("lags must be strictly ascending")
        if np.any(self.msd < 0) or np.any(self.stderr < 0):
            raise DomainError("msd and stderr must be non-negative")

    def __len__(self):
        return self.lags.size

    def rescaled(self, factor):
        """Same curve with every lag multiplied by ``factor``."""
        dt = None if self.dt is None else self.dt * factor
        return MsdCurve(self.lags * factor, self.msd, self.stderr, self.n_pairs, dt)


@dataclass
class AlphaFit:
    alpha: float
    alpha_stderr: float
    log_2d: float
    log_2d_stderr: float
    fit_lag_range: tuple
    residual_rms: float
    n_lags: int
    noise_offset: float = 0.0
    alpha_stderr_independent: float = None

    @property
    def diffusion_constant(self):
        return 0.5 * math.exp(self.log_2d)

    @property
    def d_stderr(self):
        """Standard error of D by propagation from log(2D)."""
        return self.diffusion_constant * self.log_2d_stderr


@dataclass
class AlphaTrack:
    window_centers: np.ndarray  # s
    alphas: np.ndarray  # NaN where the fit failed
    stderrs: np.ndarray
    window_length: float
    hop: float
    failures: list = field(default_factory=list)

    @property
    def valid(self):
        return np.isfinite(self.alphas)


def _as_series(series, dt):
    if isinstance(series, Trajectory):
        return series.positions, series.dt if dt is None else dt
    if dt is None:
        raise DomainError("dt is required when series is a plain array")
    return np.asarray(series, dtype=np.float64), dt


def lag_steps(lags, dt):
    """Convert lags in seconds to integer sample counts; DomainError if off-grid."""
    steps = np.asarray(lags, dtype=np.float64) / dt
    k = np.rint(steps)
    if np.any(np.abs(steps - k) > _GRID_TOL * np.maximum(1.0, steps)):
        raise DomainError("every lag must be an integer multiple of dt")
    return k.astype(np.int64)


def log_lag_grid(dt, lo=None, hi=PLATEAU_CUTOFF, per_decade=10):
    """Log-spaced lags snapped to the sample grid, covering ``[lo, hi]`` (lo defaults to dt)."""
    lo = dt if lo is None else lo
    k_lo = max(1, int(math.ceil(lo / dt - _GRID_TOL)))
    k_hi = int(math.floor(hi / dt + _GRID_TOL))
    if k_hi < k_lo:
        raise DomainError(f"lag range [{lo!r}, {hi!r}] holds no grid point for dt={dt!r}")
    decades = math.log10(k_hi / k_lo)
    count = max(2, int(math.ceil(decades * per_decade)) + 1)
    k = np.unique(np.rint(np.logspace(math.log10(k_lo), math.log10(k_hi), count)).astype(np.int64))
    return k * dt


def msd(series, lags, dt=None):
    """Time-averaged MSD at the given lags (seconds)."""
    x, dt = _as_series(series, dt)
    n = x.size
    steps = np.unique(lag_steps(lags, dt))
    if steps.size == 0:
        raise DomainError("no lags given")
    if steps[0] < 1 or steps[-1] >= n:
        raise DomainError(f"lags must lie in [dt, {n - 1} dt]")
    m = np.empty(steps.size)
    se = np.empty(steps.size)
    for i, k in enumerate(steps):
        d2 = x[k:] - x[:-k]
        d2 *= d2
        m[i] = d2.mean()
        se[i] = math.sqrt(d2.var(ddof=1) * k / n) if d2.size > 1 else m[i]
    return MsdCurve(steps * dt, m, se, n - steps, dt)


def fit_alpha(curve, lag_range=None, noise_offset=0.0):
    """Fit ``msd - noise_offset = 2 D lag**alpha`` over ``lag_range`` (inclusive).

    ``noise_offset`` is a known measurement-noise contribution to subtract,
    a scalar or one value per lag of ``curve``.
    """
    lo, hi = (curve.lags[0], curve.lags[-1]) if lag_range is None else lag_range
    tol = _GRID_TOL * max(abs(lo), abs(hi))
    sel = (curve.lags >= lo - tol) & (curve.lags <= hi + tol)
    offset = np.broadcast_to(np.asarray(noise_offset, dtype=np.float64), curve.lags.shape)[sel]
    tau = curve.lags[sel]
    y = curve.msd[sel] - offset
    se = curve.stderr[sel]
    if tau.size < 3:
        raise DegenerateInputError(f"need at least 3 lags in range, got {tau.size}")
    if np.any(y <= 0):
        raise DomainError("non-positive MSD in fit range")
    logt, logy = np.log(tau), np.log(y)
    design = np.column_stack([np.ones_like(logt), logt])
    weighted = bool(np.all(se > 0))
    w = (y / se) ** 2 if weighted else np.ones_like(y)
    # QR of the sqrt(w)-scaled system: better conditioned than forming X'WX
    q, r = np.linalg.qr(design * np.sqrt(w)[:, None])
    if abs(r[1, 1]) <= 1e-12 * abs(r[0, 0]):
        raise DegenerateInputError("singular fit: lags are not distinct enough")
    beta = linalg.solve_triangular(r, q.T @ (np.sqrt(w) * logy))
    r_inv = linalg.solve_triangular(r, np.eye(2))
    bread = r_inv @ r_inv.T  # (X'WX)^-1
    if weighted:
        naive = bread
        sig = se / y  # standard error of log(msd)
        corr = np.sqrt(np.minimum.outer(tau, tau) / np.maximum.outer(tau, tau))
        wx = design * w[:, None]
        cov = bread @ (wx.T @ (corr * np.outer(sig, sig)) @ wx) @ bread
    else:
        # no usable error bars: ordinary least squares, residual-scaled covariance
        rss = float(np.sum((logy - design @ beta) ** 2))
        cov = naive = bread * rss / max(1, tau.size - 2)
    resid = logy - design @ beta
    return AlphaFit(
        alpha=float(beta[1]),
        alpha_stderr=float(math.sqrt(cov[1, 1])),
        log_2d=float(beta[0]),
        log_2d_stderr=float(math.sqrt(cov[0, 0])),
        fit_lag_range=(float(tau[0]), float(tau[-1])),
        residual_rms=float(math.sqrt(np.mean(resid**2))),
        n_lags=int(tau.size),
        noise_offset=float(np.mean(offset)),
        alpha_stderr_independent=float(math.sqrt(naive[1, 1])),
    )


def loss_storage_ratio(alpha):
    """G''/G' = tan(pi alpha / 2); ``inf`` for the purely viscous alpha = 1."""
    if not (0 < alpha <= 1):
        raise DomainError(f"alpha must be in (0, 1], got {alpha!r}")
    if alpha == 1:
        return math.inf
    return math.tan(math.pi * alpha / 2)


def windowed_alpha(series, window_length, hop, lag_range, dt=None, noise_offset=0.0, per_decade=10):
    """alpha(t) from MSD fits in sliding windows; failed fits become NaN gaps."""
    x, dt = _as_series(series, dt)
    t0 = series.t0 if isinstance(series, Trajectory) else 0.0
    lo, hi = lag_range
    if window_length < 10 * hi * (1 - _GRID_TOL):
        raise DomainError("window_length must be at least 10x the largest lag")
    w = int(round(window_length / dt))
    step = int(round(hop / dt))
    if w > x.size:
        raise DomainError(f"window of {w} samples is longer than the record ({x.size})")
    if step < 1:
        raise DomainError(f"hop must be at least one sample, got {hop!r}")
    lags = log_lag_grid(dt, lo, hi, per_decade)
    starts = np.arange(0, x.size - w + 1, step)
    alphas = np.full(starts.size, np.nan)
    stderrs = np.full(starts.size, np.nan)
    failures = []
    for i, s in enumerate(starts):
        try:
            fit = fit_alpha(msd(x[s:s + w], lags, dt), (lo, hi), noise_offset)
        except DomainError as exc:
            failures.append((int(i), str(exc)))
            continue
        alphas[i] = fit.alpha
        stderrs[i] = fit.alpha_stderr
    centers = t0 + (starts + w / 2) * dt
    return AlphaTrack(centers, alphas, stderrs, w * dt, step * dt, failures)


@dataclass
class PrecisionReport:
    precision_gain: float
    rate_gain: float
    db_equivalent: float
    classical_stderr: float
    squeezed_stderr: float
    classical_alpha: float
    squeezed_alpha: float
    classical_spread: float
    squeezed_spread: float
    n_fits: int

    def as_dict(self):
        return dict(self.__dict__)


def precision_comparison(fits_classical, fits_squeezed, floor_ratio=None):
    """Squeezed-vs-classical precision of alpha.

    ``floor_ratio`` is the demodulated noise-floor ratio squeezed/classical,
    reported in dB when given.  Ensemble spreads (std of alpha) are reported
    alongside the mean per-fit standard errors.
    """
    fits_classical, fits_squeezed = list(fits_classical), list(fits_squeezed)
    if not fits_classical or not fits_squeezed:
        raise DomainError("both fit lists must be non-empty")
    if len(fits_classical) != len(fits_squeezed):
        raise DomainError("fit lists must come from matched scenarios of equal size")
    se_c = float(np.mean([f.alpha_stderr for f in fits_classical]))
    se_s = float(np.mean([f.alpha_stderr for f in fits_squeezed]))
    a_c = np.array([f.alpha for f in fits_classical])
    a_s = np.array([f.alpha for f in fits_squeezed])
    g = 1.0 - se_s / se_c
    rate = measurement_rate_gain(g) if g >= 0 else (1.0 - g) ** -2 - 1.0
    db = None if floor_ratio is None else -10.0 * math.log10(floor_ratio)
    spread = lambda a: float(a.std(ddof=1)) if a.size > 1 else 0.0  # noqa: E731
    return PrecisionReport(g, rate, db, se_c, se_s, float(a_c.mean()), float(a_s.mean()),
                           spread(a_c), spread(a_s), len(fits_classical))
