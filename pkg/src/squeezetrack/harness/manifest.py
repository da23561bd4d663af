"""Run a scenario into a directory and record what was written.

The manifest is written last, through a temporary file and an atomic
rename, and any stale manifest is removed before a run starts: a directory
with a ``manifest.json`` always holds a complete run.  Wall-clock time lives
in ``timing.json``, which the manifest names but does not checksum, so
repeated runs of one config produce byte-identical manifests.
"""

import json
import os
from pathlib import Path
import time

from squeezetrack import __version__, io
from squeezetrack.errors import DomainError
from squeezetrack.harness import scenarios

MANIFEST = "manifest.json"
TIMING = "timing.json"
MANIFEST_VERSION = 1


def _dump(data):
    return json.dumps(data, sort_keys=True, indent=2, default=io._json_default) + "\n"


def _atomic_write(path, text):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run_to_directory(cfg, out_dir, workers=1):
    """Run ``cfg`` and write all outputs into ``out_dir``; returns ``(manifest, outcome)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST).unlink(missing_ok=True)
    start = time.perf_counter()
    outcome = scenarios.run(cfg, workers)
    config_hash = cfg.config_hash()

    (out / "config.cfg").write_text(f"# squeezetrack config v1\n# config_hash: {config_hash}\n"
                                    + cfg.canonical_text())
    for name in sorted(outcome.files):
        outcome.files[name](out / name, config_hash)
    io.write_report(out / "report.txt", outcome.report, config_hash)
    checks = {c.name: {"passed": bool(c.passed), "value": c.value, "target": c.target} for c in outcome.checks}
    io.write_report(out / "checks.txt", {f"{k}.{f}": v[f] for k, v in checks.items() for f in v},
                    config_hash, kind="checks")

    emitted = ["config.cfg", "report.txt", "checks.txt", *outcome.files]
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "code_version": __version__,
        "scenario": cfg.scenario,
        "config_hash": config_hash,
        "files": {name: io.sha256_file(out / name) for name in sorted(emitted)},
        "achieved_sample_rates": outcome.sample_rates,
        "checks_passed": all(c.passed for c in outcome.checks),
        "timing_file": TIMING,
    }
    (out / TIMING).write_text(_dump({"wall_clock_s": time.perf_counter() - start, "workers": workers}))
    _atomic_write(out / MANIFEST, _dump(manifest))
    return manifest, outcome


def load_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        return path, json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read manifest {path}: {exc}") from exc


def verify(path):
    """Return ``(manifest, problems)``; problems lists missing or altered files."""
    path, manifest = load_manifest(path)
    problems = []
    for name, digest in manifest.get("files", {}).items():
        target = path.parent / name
        if not target.exists():
            problems.append(f"{name}: missing")
        elif io.sha256_file(target) != digest:
            problems.append(f"{name}: checksum mismatch")
    return manifest, problems
