import numpy as np
import pytest

from squeezetrack import DomainError
from squeezetrack import dynamics as dyn
from squeezetrack import estimators as est
from squeezetrack import io
from squeezetrack import signal_chain as sc


@pytest.fixture
def traj():
    return dyn.simulate_fbm(dyn.DiffusionSpec(1e-14, 0.815), 141 / sc.RAW_RATE, 500, seed=7)


def test_trajectory_text_round_trip(tmp_path, traj):
    traj.t0 = 2.5e-6
    path = io.write_trajectory_text(tmp_path / "t.txt", traj, config_hash="abc")
    back = io.read_trajectory_text(path)
    assert np.array_equal(back.positions, traj.positions)
    assert back.dt == traj.dt and back.seed == 7 and back.t0 == traj.t0
    header, cols = io.read_columns(path)
    assert header["units"] == {"time_s": "s", "position_m": "m"}
    assert header["config_hash"] == "abc"
    assert np.array_equal(cols["time_s"], traj.times)


def test_trajectory_binary_round_trip(tmp_path, traj):
    path = io.write_trajectory_binary(tmp_path / "t.bin", traj)
    raw = path.read_bytes()
    assert raw[:4] == b"SQTJ"
    assert len(raw) == 32 + 8 * len(traj)
    back = io.read_trajectory_binary(path)
    assert np.array_equal(back.positions, traj.positions)
    assert back.dt == traj.dt and back.seed == traj.seed


def test_record_binary_round_trip(tmp_path, traj):
    rec = sc.synthesize_record(traj, 1e9, sc.NoiseConfig(), seed=3)
    back = io.read_record_binary(io.write_record_binary(tmp_path / "r.bin", rec))
    assert np.array_equal(back.samples, rec.samples)
    assert back.sample_rate == rec.sample_rate
    assert back.carrier_freq == rec.carrier_freq
    assert back.seed == 3


def test_binary_rejects_corruption(tmp_path, traj):
    path = io.write_trajectory_binary(tmp_path / "t.bin", traj)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DomainError, match="expected"):
        io.read_trajectory_binary(path)
    with pytest.raises(DomainError, match="magic"):
        io.read_record_binary(io.write_trajectory_binary(tmp_path / "u.bin", traj))


def test_binary_seed_range(tmp_path):
    t = dyn.Trajectory(np.zeros(3), 1.0, seed=2**64)
    with pytest.raises(DomainError):
        io.write_trajectory_binary(tmp_path / "x.bin", t)


def test_msd_round_trip(tmp_path, traj):
    curve = est.msd(traj, est.log_lag_grid(traj.dt, traj.dt, 1e-3))
    back = io.read_msd(io.write_msd(tmp_path / "m.txt", curve, meta={"arm": "squeezed"}))
    for name in ("lags", "msd", "stderr", "n_pairs"):
        assert np.array_equal(getattr(back, name), getattr(curve, name))
    assert back.dt == curve.dt
    assert io.read_columns(tmp_path / "m.txt")[0]["arm"] == "squeezed"


def test_alpha_track_round_trip_with_gaps(tmp_path):
    track = est.AlphaTrack(np.array([0.025, 0.035]), np.array([0.8, np.nan]), np.array([0.01, np.nan]), 0.05, 0.01)
    back = io.read_alpha_track(io.write_alpha_track(tmp_path / "a.txt", track))
    assert back.alphas[0] == 0.8 and np.isnan(back.alphas[1])
    assert back.window_length == 0.05 and back.hop == 0.01


def test_spectrum_round_trip(tmp_path):
    x = np.random.default_rng(1).standard_normal(8192)
    spec = sc.welch_psd(x, 1e5, 1024)
    back = io.read_spectrum(io.write_spectrum(tmp_path / "s.txt", spec, meta={"psd_unit": "m^2/Hz"}))
    assert np.array_equal(back.psd, spec.psd)
    assert back.resolution_bandwidth == spec.resolution_bandwidth
    assert back.averaging_count == spec.averaging_count
    assert io.read_columns(tmp_path / "s.txt")[0]["units"]["psd"] == "m^2/Hz"


def test_report_round_trip(tmp_path):
    values = {"detected_variance": 0.5248074602497726, "label": "yeast", "n": 3, "flag": True,
              "gain": float("inf"), "list": [0.1, 0.2]}
    back = io.read_report(io.write_report(tmp_path / "r.txt", values, "h"))
    assert back == values
    text = (tmp_path / "r.txt").read_text()
    assert text.index("detected_variance") < text.index("gain") < text.index("label")


def test_not_squeezetrack_file(tmp_path):
    (tmp_path / "x.txt").write_text("1 2\n")
    with pytest.raises(DomainError):
        io.read_columns(tmp_path / "x.txt")
