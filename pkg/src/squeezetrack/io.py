"""File formats.

Text files are columnar with ``#`` header lines::

    # squeezetrack msd v1
    # config_hash: 3f2a...
    # units: lag=s msd=m^2 stderr=m^2 n_pairs=count
    # dt: 1.0008517887563884e-05
    # columns: lag_s msd_m2 stderr_m2 n_pairs
    1.0008517887563884e-05 ...

Floats are written with 17 significant digits so they read back exactly.
Binary trajectories are a little-endian header (magic, version, dt, n,
seed) followed by ``n`` float64 positions.  Raw records use the same layout
with a different magic and the carrier frequency and exact sample rate
appended to the header (``1/dt`` does not always round-trip).
"""

import hashlib
import json
import math
from pathlib import Path
import struct

import numpy as np

from squeezetrack.dynamics import Trajectory
from squeezetrack.errors import DomainError
from squeezetrack.estimators import AlphaTrack, MsdCurve
from squeezetrack.signal_chain import RawRecord, Spectrum

FORMAT_VERSION = 1
_FLOAT = "%.17g"

_TRAJ_MAGIC = b"SQTJ"
_RAW_MAGIC = b"SQRW"
_TRAJ_HEADER = struct.Struct("<4sIdQQ")
_RAW_HEADER = struct.Struct("<4sIdQQdd")


def fmt(value):
    """Round-trip text for a scalar: floats at full precision, others via JSON."""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return _FLOAT % value
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return json.dumps(value, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def parse_value(text):
    text = text.strip()
    if text in ("nan", "inf", "-inf"):
        return float(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_columns(path, kind, columns, units, config_hash="", meta=None):
    """Write named equal-length columns; ``units`` maps each column to its unit."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=np.float64) for k in names])
    lines = [f"squeezetrack {kind} v{FORMAT_VERSION}", f"config_hash: {config_hash}",
             "units: " + " ".join(f"{k}={units[k]}" for k in names)]
    for key, value in sorted((meta or {}).items()):
        lines.append(f"{key}: {fmt(value)}")
    lines.append("columns: " + " ".join(names))
    fmts = ["%d" if units[k] == "count" else _FLOAT for k in names]
    np.savetxt(path, data, fmt=fmts, header="\n".join(lines), comments="# ")
    return Path(path)


def read_columns(path):
    """Return ``(header, columns)``; header values are parsed back to Python scalars."""
    header, names = {}, None
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# squeezetrack "):
            raise DomainError(f"{path}: not a squeezetrack text file")
        header["kind"] = first.split()[2]
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            if key == "columns":
                names = value.split()
            elif key == "units":
                header["units"] = dict(item.split("=", 1) for item in value.split())
            elif key == "config_hash":
                header[key] = value
            else:
                header[key] = parse_value(value)
    if names is None:
        raise DomainError(f"{path}: missing columns header")
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(names)))
    return header, {k: data[:, i] for i, k in enumerate(names)}


def write_trajectory_text(path, traj, config_hash=""):
    meta = {"dt": traj.dt, "seed": int(traj.seed), "t0": traj.t0}
    return write_columns(path, "trajectory", {"time_s": traj.times, "position_m": traj.positions},
                         {"time_s": "s", "position_m": "m"}, config_hash, meta)


def read_trajectory_text(path):
    header, cols = read_columns(path)
    return Trajectory(cols["position_m"], header["dt"], seed=header["seed"], t0=header["t0"])


def write_spectrum(path, spec, config_hash="", meta=None):
    meta = {"averaging_count": int(spec.averaging_count), **(meta or {})}
    rbw = np.full(spec.frequencies.size, spec.resolution_bandwidth)
    return write_columns(path, "spectrum", {"frequency_Hz": spec.frequencies, "psd": spec.psd, "rbw_Hz": rbw},
                         {"frequency_Hz": "Hz", "psd": meta.pop("psd_unit", "1/Hz"), "rbw_Hz": "Hz"},
                         config_hash, meta)


def read_spectrum(path):
    header, cols = read_columns(path)
    rbw = float(cols["rbw_Hz"][0]) if cols["rbw_Hz"].size else math.nan
    return Spectrum(cols["frequency_Hz"], cols["psd"], rbw, header["averaging_count"])


def write_msd(path, curve, config_hash="", meta=None):
    meta = {"dt": curve.dt, **(meta or {})}
    return write_columns(path, "msd",
                         {"lag_s": curve.lags, "msd_m2": curve.msd, "stderr_m2": curve.stderr,
                          "n_pairs": curve.n_pairs},
                         {"lag_s": "s", "msd_m2": "m^2", "stderr_m2": "m^2", "n_pairs": "count"},
                         config_hash, meta)


def read_msd(path):
    header, cols = read_columns(path)
    return MsdCurve(cols["lag_s"], cols["msd_m2"], cols["stderr_m2"], cols["n_pairs"].astype(np.int64),
                    header.get("dt"))


def write_alpha_track(path, track, config_hash="", meta=None):
    meta = {"window_length": track.window_length, "hop": track.hop, **(meta or {})}
    return write_columns(path, "alpha_track",
                         {"center_s": track.window_centers, "alpha": track.alphas, "stderr": track.stderrs},
                         {"center_s": "s", "alpha": "1", "stderr": "1"}, config_hash, meta)


def read_alpha_track(path):
    header, cols = read_columns(path)
    return AlphaTrack(cols["center_s"], cols["alpha"], cols["stderr"], header["window_length"], header["hop"])


def write_report(path, values, config_hash="", kind="report"):
    """Structured key-value text: one ``key = value`` per line, keys sorted."""
    lines = [f"# squeezetrack {kind} v{FORMAT_VERSION}", f"# config_hash: {config_hash}"]
    lines += [f"{key} = {fmt(values[key])}" for key in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_report(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise DomainError(f"{path}: malformed report line {line!r}")
        out[key] = parse_value(value)
    return out


def _check_seed(seed):
    if not 0 <= int(seed) < 2**64:
        raise DomainError(f"binary layout stores 64-bit seeds, got {seed!r}")
    return int(seed)


def write_trajectory_binary(path, traj):
    header = _TRAJ_HEADER.pack(_TRAJ_MAGIC, FORMAT_VERSION, traj.dt, traj.positions.size, _check_seed(traj.seed))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(traj.positions.astype("<f8").tobytes())
    return Path(path)


def _read_binary(path, magic, layout):
    raw = Path(path).read_bytes()
    if len(raw) < layout.size:
        raise DomainError(f"{path}: truncated header")
    fields = layout.unpack_from(raw)
    if fields[0] != magic:
        raise DomainError(f"{path}: bad magic {fields[0]!r}")
    if fields[1] != FORMAT_VERSION:
        raise DomainError(f"{path}: unsupported version {fields[1]}")
    n = fields[3]
    payload = raw[layout.size:]
    if len(payload) != 8 * n:
        raise DomainError(f"{path}: expected {n} samples, found {len(payload) // 8}")
    return fields, np.frombuffer(payload, dtype="<f8").astype(np.float64)


def read_trajectory_binary(path):
    (_, _, dt, _, seed), x = _read_binary(path, _TRAJ_MAGIC, _TRAJ_HEADER)
    return Trajectory(x, dt, seed=seed)


def write_record_binary(path, rec):
    header = _RAW_HEADER.pack(_RAW_MAGIC, FORMAT_VERSION, 1.0 / rec.sample_rate, rec.samples.size,
                              _check_seed(rec.seed), rec.carrier_freq, rec.sample_rate)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.samples.astype("<f8").tobytes())
    return Path(path)


def read_record_binary(path):
    (_, _, _, _, seed, carrier, rate), x = _read_binary(path, _RAW_MAGIC, _RAW_HEADER)
    return RawRecord(x, rate, carrier, seed=seed)
