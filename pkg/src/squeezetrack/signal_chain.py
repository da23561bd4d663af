"""Detector record synthesis, lock-in demodulation and spectral estimation.

The raw record is normalized so that white noise of unit variance per sample
is the shot-noise level of a coherent (V = 1) field.  Displacement is
amplitude-modulated onto the carrier; demodulation mixes with
``2 cos(2 pi f_mod t)``, applies a linear-phase windowed-sinc FIR filter and
decimates.

Demodulation evaluates the filter only at the retained output instants, each
from its own window of raw samples, so there is no filter state to carry
between blocks and any block split yields bit-identical output.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import signal

from squeezetrack.dynamics import Trajectory
from squeezetrack.errors import DomainError
from squeezetrack.rng import make_rng, rng_metadata

CARRIER_FREQ = 3.522e6
RAW_RATE = 4 * CARRIER_FREQ
OUTPUT_RATE = 1e5

_GRID_TOL = 1e-9


@dataclass
class RawRecord:
    samples: np.ndarray
    sample_rate: float
    carrier_freq: float = CARRIER_FREQ
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if not (self.sample_rate > 2 * self.carrier_freq):
            raise DomainError(
                f"sample_rate {self.sample_rate!r} must exceed twice the carrier {self.carrier_freq!r}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("raw record contains non-finite samples")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class NoiseConfig:
    """Detector noise relative to the coherent shot-noise level.

    ``technical_amplitude`` squared is the technical-to-shot PSD ratio at
    1 Hz; the technical PSD falls as 1/f up to ``technical_corner`` and is
    zero above it.  ``lock_tone`` is an optional ``(frequency_Hz, amplitude)``
    sinusoidal spur.  A zero floor gives a noiseless chain.
    """

    variance_floor: float = 1.0
    technical_corner: float = 0.0
    technical_amplitude: float = 0.0
    lock_tone: tuple = None

    def __post_init__(self):
        if not (self.variance_floor >= 0):
            raise DomainError(f"variance_floor must be >= 0, got {self.variance_floor!r}")
        if self.technical_corner < 0 or self.technical_amplitude < 0:
            raise DomainError("technical noise terms must be >= 0")
        if self.lock_tone is not None:
            freq, amp = self.lock_tone
            if freq <= 0 or amp < 0:
                raise DomainError(f"lock_tone must be (freq > 0, amplitude >= 0), got {self.lock_tone!r}")


@dataclass(frozen=True)
class DemodConfig:
    carrier_freq: float = CARRIER_FREQ
    output_rate: float = OUTPUT_RATE
    lowpass_cutoff: float = 5e4
    # even length gives an exact null at raw_rate/2, which is 2*f_mod on the 4*f_mod grid
    filter_taps: int = 140
    window: str = "hann"

    def __post_init__(self):
        if not (self.carrier_freq > 0 and self.output_rate > 0 and self.lowpass_cutoff > 0):
            raise DomainError("carrier_freq, output_rate and lowpass_cutoff must be > 0")
        if int(self.filter_taps) != self.filter_taps or self.filter_taps < 2:
            raise DomainError(f"filter_taps must be an integer >= 2, got {self.filter_taps!r}")

    def decimation(self, sample_rate):
        return max(1, int(round(sample_rate / self.output_rate)))

    def achieved_rate(self, sample_rate):
        return sample_rate / self.decimation(sample_rate)

    def check(self, sample_rate):
        """Raise DomainError unless the filter can be built at ``sample_rate``."""
        if 2 * self.lowpass_cutoff >= sample_rate:
            raise DomainError(
                f"lowpass_cutoff {self.lowpass_cutoff!r} Hz is not below the input Nyquist frequency"
            )
        achieved = self.achieved_rate(sample_rate)
        if achieved > 2 * self.lowpass_cutoff * (1 + _GRID_TOL):
            raise DomainError(
                f"output rate {achieved!r} Hz exceeds twice the lowpass cutoff {self.lowpass_cutoff!r} Hz"
            )

    def taps(self, sample_rate):
        self.check(sample_rate)
        h = signal.firwin(int(self.filter_taps), self.lowpass_cutoff, window=self.window, fs=sample_rate)
        # exact symmetry, so the even-length null is exact too
        return 0.5 * (h + h[::-1])


@dataclass
class Spectrum:
    frequencies: np.ndarray
    psd: np.ndarray
    resolution_bandwidth: float
    averaging_count: int

    def band(self, lo, hi):
        sel = (self.frequencies >= lo) & (self.frequencies <= hi)
        return self.frequencies[sel], self.psd[sel]


def carrier(n, carrier_freq, sample_rate, start=0):
    """``cos(2 pi f k / fs)`` for ``start <= k < start + n``, phase reduced modulo one cycle."""
    cycles = np.arange(start, start + n, dtype=np.float64) * (carrier_freq / sample_rate)
    return np.cos(2 * np.pi * np.mod(cycles, 1.0))


def hold_factor(dt, sample_rate):
    """Number of raw samples per trajectory sample; DomainError if not an integer."""
    ratio = dt * sample_rate
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > _GRID_TOL * max(1.0, ratio):
        raise DomainError(f"trajectory dt {dt!r} is not an integer multiple of 1/{sample_rate!r}")
    return k


def technical_noise(n, sample_rate, noise, rng):
    """1/f technical noise in shot-noise units, band-limited to ``noise.technical_corner``."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    shape = np.zeros_like(f)
    band = (f > 0) & (f <= noise.technical_corner)
    shape[band] = noise.technical_amplitude / np.sqrt(f[band])
    return np.fft.irfft(spec * shape, n=n)


def synthesize_record(traj, gain, noise, raw_rate=RAW_RATE, seed=0, stream=(), carrier_freq=CARRIER_FREQ):
    """Amplitude-modulated detector record for a trajectory.

    Positions are zero-order held onto the raw grid.  Noise draws: quantum
    floor first, then the technical component, both from one stream.
    """
    if not (raw_rate > 2 * carrier_freq):
        raise DomainError(f"raw_rate {raw_rate!r} must exceed twice the carrier {carrier_freq!r}")
    hold = hold_factor(traj.dt, raw_rate)
    n = traj.positions.size * hold
    rng = make_rng(seed, *stream)
    out = np.repeat(traj.positions * gain, hold)
    out *= carrier(n, carrier_freq, raw_rate)
    out += math.sqrt(noise.variance_floor) * rng.standard_normal(n)
    if noise.technical_amplitude > 0 and noise.technical_corner > 0:
        out += technical_noise(n, raw_rate, noise, rng)
    if noise.lock_tone is not None:
        freq, amp = noise.lock_tone
        out += amp * carrier(n, freq, raw_rate)
    meta = {"gain": gain, "hold": hold, "variance_floor": noise.variance_floor,
            "technical_corner": noise.technical_corner, "technical_amplitude": noise.technical_amplitude,
            "trajectory_dt": traj.dt, **rng_metadata(seed, *stream)}
    return RawRecord(out, raw_rate, carrier_freq, seed=int(seed), meta=meta)


def _kernel_starts(n_raw, decim, taps):
    offset = (decim - taps) // 2
    m = np.arange(-(-max(0, -offset) // decim), (n_raw - taps - offset) // decim + 1)
    return m, m * decim + offset


def demodulate(rec, cfg=DemodConfig(), gain=1.0, block_size=None):
    """In-phase lock-in demodulation of ``rec`` to ``cfg.output_rate``.

    Output sample ``m`` estimates the displacement held over raw samples
    ``[m*D, (m+1)*D)`` (``D`` the decimation factor) and is time-stamped at
    ``m*D/sample_rate``, i.e. on the grid of the trajectory that produced the
    record.  Samples whose filter window would leave the record are dropped;
    with ``filter_taps <= D`` none are.  Values are divided by ``gain``.
    """
    if abs(cfg.carrier_freq - rec.carrier_freq) > _GRID_TOL * rec.carrier_freq:
        raise DomainError(f"demodulation carrier {cfg.carrier_freq!r} != record carrier {rec.carrier_freq!r}")
    h = cfg.taps(rec.sample_rate)
    decim = cfg.decimation(rec.sample_rate)
    taps = h.size
    idx, starts = _kernel_starts(rec.samples.size, decim, taps)
    if idx.size < 2:
        raise DomainError("record too short for the demodulation filter")
    mixed = 2.0 * rec.samples * carrier(rec.samples.size, rec.carrier_freq, rec.sample_rate)
    windows = np.lib.stride_tricks.sliding_window_view(mixed, taps)
    block = idx.size if block_size is None else int(block_size)
    out = np.empty(idx.size)
    for lo in range(0, idx.size, block):
        w = windows[starts[lo:lo + block]]
        # row-wise pairwise summation: independent of how many rows are in the block
        out[lo:lo + block] = (w * h).sum(axis=1)
    out /= gain
    dt = decim / rec.sample_rate
    meta = {"decimation": decim, "achieved_rate": rec.sample_rate / decim, "filter_taps": taps,
            "lowpass_cutoff": cfg.lowpass_cutoff, "window": cfg.window, "first_index": int(idx[0]),
            "kernel_center_offset_s": ((decim - taps) // 2 + (taps - 1) / 2) / rec.sample_rate,
            "gain": gain}
    return Trajectory(out, dt, seed=rec.seed, t0=idx[0] * dt, meta=meta)


def demod_noise_variance(cfg=DemodConfig(), sample_rate=RAW_RATE, periods=64):
    """Per-output-sample variance of demodulated unit-variance white raw noise."""
    h = cfg.taps(sample_rate)
    decim = cfg.decimation(sample_rate)
    _, starts = _kernel_starts(decim * (periods + 2) + h.size, decim, h.size)
    starts = starts[:periods]
    k = starts[:, None] + np.arange(h.size)[None, :]
    lo = (2.0 * carrier(k.max() + 1, cfg.carrier_freq, sample_rate))[k]
    return float(np.mean(np.sum((lo * h) ** 2, axis=1)))


def gain_for_sensitivity(sensitivity, cfg=DemodConfig(), sample_rate=RAW_RATE):
    """Detector gain (units/m) at which the coherent floor equals ``sensitivity`` (m/sqrt(Hz)).

    The demodulated coherent-state noise then has one-sided PSD
    ``sensitivity**2`` in m^2/Hz.
    """
    if not (sensitivity > 0):
        raise DomainError(f"sensitivity must be > 0, got {sensitivity!r}")
    var = demod_noise_variance(cfg, sample_rate)
    return math.sqrt(2 * var / (cfg.achieved_rate(sample_rate) * sensitivity**2))


def position_noise_variance(noise_variance, gain, cfg=DemodConfig(), sample_rate=RAW_RATE):
    """Variance (m^2) of demodulated position noise for a floor of ``noise_variance``."""
    return noise_variance * demod_noise_variance(cfg, sample_rate) / gain**2


def track(traj, gain, noise, cfg=DemodConfig(), raw_rate=RAW_RATE, seed=0, stream=(), block_samples=8192):
    """Measure a trajectory through the full chain; returns positions in metres.

    Long records are processed ``block_samples`` trajectory samples at a time
    when that is exact: each output sample then depends only on the raw
    samples of its own block, and the noise stream is drawn in order.  The
    result is bitwise identical to a one-shot :func:`synthesize_record` plus
    :func:`demodulate`.  Technical noise is shaped over the whole record, so
    its presence (or a filter longer than the decimation factor) forces the
    one-shot path.
    """
    hold = hold_factor(traj.dt, raw_rate)
    decim = cfg.decimation(raw_rate)
    no_technical = noise.technical_amplitude == 0 or noise.technical_corner == 0
    aligned = hold == decim and cfg.filter_taps <= decim
    blockable = no_technical and aligned and block_samples and len(traj) > block_samples
    if not blockable:
        rec = synthesize_record(traj, gain, noise, raw_rate, seed=seed, stream=stream,
                                carrier_freq=cfg.carrier_freq)
        out = demodulate(rec, cfg, gain=gain)
        out.t0 += traj.t0
        out.meta["record"] = rec.meta
        return out
    if abs(cfg.carrier_freq * 2) >= raw_rate:
        raise DomainError(f"raw_rate {raw_rate!r} must exceed twice the carrier {cfg.carrier_freq!r}")
    h = cfg.taps(raw_rate)
    rng = make_rng(seed, *stream)
    parts = []
    for lo in range(0, len(traj), block_samples):
        pos = traj.positions[lo:lo + block_samples]
        start = lo * hold
        n = pos.size * hold
        raw = np.repeat(pos * gain, hold)
        raw *= carrier(n, cfg.carrier_freq, raw_rate, start)
        raw += math.sqrt(noise.variance_floor) * rng.standard_normal(n)
        if noise.lock_tone is not None:
            freq, amp = noise.lock_tone
            raw += amp * carrier(n, freq, raw_rate, start)
        mixed = 2.0 * raw * carrier(n, cfg.carrier_freq, raw_rate, start)
        _, starts = _kernel_starts(n, decim, h.size)
        windows = np.lib.stride_tricks.sliding_window_view(mixed, h.size)
        parts.append((windows[starts] * h).sum(axis=1))
    out = np.concatenate(parts) / gain
    dt = decim / raw_rate
    meta = {"decimation": decim, "achieved_rate": raw_rate / decim, "filter_taps": int(cfg.filter_taps),
            "lowpass_cutoff": cfg.lowpass_cutoff, "window": cfg.window, "first_index": 0,
            "kernel_center_offset_s": ((decim - h.size) // 2 + (h.size - 1) / 2) / raw_rate, "gain": gain,
            "record": {"gain": gain, "hold": hold, "variance_floor": noise.variance_floor,
                       "technical_corner": noise.technical_corner,
                       "technical_amplitude": noise.technical_amplitude, "trajectory_dt": traj.dt,
                       **rng_metadata(seed, *stream)}}
    return Trajectory(out, dt, seed=int(seed), t0=traj.t0, meta=meta)


def welch_psd(series, sample_rate=None, segment_length=1024, overlap_fraction=0.5, window="hann",
              detrend="constant"):
    """Averaged-periodogram one-sided PSD.

    ``series`` is an array (then ``sample_rate`` is required) or a
    :class:`Trajectory`.  By default each segment has its mean removed, which
    depresses the first non-zero bin; pass ``detrend=False`` for zero-mean
    processes whose lowest bins matter.
    """
    if isinstance(series, Trajectory):
        sample_rate = 1.0 / series.dt if sample_rate is None else sample_rate
        series = series.positions
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise DomainError("empty series")
    if sample_rate is None or not (sample_rate > 0):
        raise DomainError("sample_rate must be given and > 0")
    nseg = int(segment_length)
    if nseg < 2 or nseg > x.size:
        raise DomainError(f"segment_length {segment_length!r} must be in [2, {x.size}]")
    if not (0 <= overlap_fraction < 1):
        raise DomainError(f"overlap_fraction must be in [0, 1), got {overlap_fraction!r}")
    overlap = int(round(overlap_fraction * nseg))
    f, p = signal.welch(x, fs=sample_rate, window=window, nperseg=nseg, noverlap=overlap,
                        detrend=detrend, scaling="density", return_onesided=True)
    w = signal.get_window(window, nseg)
    rbw = sample_rate * np.sum(w**2) / np.sum(w) ** 2
    count = (x.size - overlap) // (nseg - overlap)
    return Spectrum(f, p, float(rbw), int(count))
