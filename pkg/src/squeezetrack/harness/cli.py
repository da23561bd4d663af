"""Command-line entry point.

    squeezetrack run <config-file> [--out DIR] [--workers N] [--seed S] [--check]
    squeezetrack validate <config-file>
    squeezetrack report <manifest>

``<config-file>`` may also be ``preset:NAME`` for a shipped preset.  Without
``--out`` the output directory is the config's ``output_dir``, else
``$SQUEEZETRACK_OUT/<scenario>``, else ``./squeezetrack-runs/<scenario>``.

Exit codes: 0 success, 2 config error, 3 runtime or domain error, 4 a
self-check failed (``--check``).
"""

import argparse
from importlib import resources
import logging
import os
from pathlib import Path
import sys

from squeezetrack.errors import ConfigError, DomainError
from squeezetrack.harness import manifest as mf
from squeezetrack.harness.config import validate_config
from squeezetrack.io import read_report

log = logging.getLogger("squeezetrack")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
OUT_ENV = "SQUEEZETRACK_OUT"


def preset_names():
    root = resources.files("squeezetrack.harness") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def read_config_text(source):
    if source.startswith("preset:"):
        name = source[len("preset:"):]
        if name not in preset_names():
            raise ConfigError([f"unknown preset {name!r}; available: {', '.join(preset_names())}"])
        return (resources.files("squeezetrack.harness") / "presets" / f"{name}.cfg").read_text()
    try:
        return Path(source).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {source}: {exc.strerror}"]) from exc


def output_dir(cfg, requested):
    if requested:
        return Path(requested)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    base = os.environ.get(OUT_ENV)
    return Path(base or "squeezetrack-runs") / cfg.scenario


def cmd_validate(args):
    cfg = validate_config(read_config_text(args.config))
    sys.stdout.write(cfg.canonical_text())
    print(f"# config_hash: {cfg.config_hash()}")
    return EXIT_OK


def cmd_run(args):
    cfg = validate_config(read_config_text(args.config))
    if args.seed is not None:
        cfg = cfg.with_overrides({"seeds.trajectory": args.seed, "seeds.noise": args.seed})
    out = output_dir(cfg, args.out)
    log.info("running %s (%d replicates) into %s", cfg.scenario, cfg.replicate_count, out)
    manifest, outcome = mf.run_to_directory(cfg, out, workers=args.workers)
    for key in sorted(outcome.report):
        print(f"{key} = {outcome.report[key]}")
    print(f"manifest: {out / mf.MANIFEST}")
    if args.check:
        for c in outcome.checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value} (target {c.target})")
        if not manifest["checks_passed"]:
            return EXIT_CHECK
    return EXIT_OK


def cmd_report(args):
    manifest, problems = mf.verify(args.manifest)
    path, _ = mf.load_manifest(args.manifest)
    print(f"scenario: {manifest['scenario']}  config_hash: {manifest['config_hash']}")
    for key, value in sorted(read_report(path.parent / "report.txt").items()):
        print(f"{key} = {value}")
    checks = path.parent / "checks.txt"
    if checks.exists():
        for key, value in sorted(read_report(checks).items()):
            if key.endswith(".passed"):
                print(f"[{'PASS' if value else 'FAIL'}] {key[:-len('.passed')]}")
    for p in problems:
        print(f"integrity: {p}", file=sys.stderr)
    return EXIT_RUNTIME if problems else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="squeezetrack", description="Squeezed-light particle tracking simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its data files")
    run.add_argument("config", help="config file, or preset:NAME")
    run.add_argument("--out", help=f"output directory (default: config output_dir, then ${OUT_ENV}/<scenario>)")
    run.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    run.add_argument("--seed", type=int, help="override both trajectory and noise seeds")
    run.add_argument("--check", action="store_true", help="exit 4 if any self-check fails")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="validate a config and print it with defaults filled in")
    val.add_argument("config", help="config file, or preset:NAME")
    val.set_defaults(func=cmd_validate)

    rep = sub.add_parser("report", help="verify a run's checksums and print its report")
    rep.add_argument("manifest", help="manifest.json or the run directory")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
