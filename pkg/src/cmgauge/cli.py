"""Command line front end.

    cmgauge run CONFIG                run a solver on a JSON run configuration
    cmgauge verify SUITE [--seed N]   run a verification suite on the built-in corpus
    cmgauge identities [--samples N]  closed-form lattice sums against truncated series

Exit codes: 0 success, 1 configuration error (nothing written), 2 particle
collision (partial trajectory kept), 3 a verification check failed.
Output files go to ``--output-dir``, else ``$CMGAUGE_OUTPUT_DIR``, else the
directory of ``output.path`` (relative to the working directory).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .configio import (
    SCHEMA_VERSION,
    ConfigFormatError,
    canonical_hash,
    load_run_config,
    output_times,
    system_from_dict,
)
from .exact import CollisionDetected, Trajectory, solve
from .models import CollisionSingularity, ConfigError, PiecewiseExp, SystemConfig
from .oracle import IntegratorSettings, StepLimitExceeded, integrate, integrate_field

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COLLISION = 2
EXIT_CHECK = 3

OUTPUT_ENV = "CMGAUGE_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# trajectory files

def _fmt(x: float) -> str:
    # shortest round-trip repr: exact and byte-stable
    return repr(float(x))


def trajectory_columns(n: int, m: int) -> list[str]:
    cols = ["t"]
    cols += [f"q{a}_{part}" for a in range(1, n + 1) for part in ("re", "im")]
    cols += [f"p{a}_{part}" for a in range(1, n + 1) for part in ("re", "im")]
    cols += [f"s{j}_{a}{b}_{part}" for j in range(1, m + 1) for a in range(1, n + 1)
             for b in range(1, n + 1) for part in ("re", "im")]
    cols += ["energy_re", "energy_im"]
    cols += [f"cas{k}_drift" for k in range(1, 5)]
    cols += ["min_gap"]
    return cols


COLUMN_MEANINGS = [
    "t: time",
    "qA_re, qA_im: position of particle A",
    "pA_re, pA_im: momentum of particle A",
    "sJ_AB_re, sJ_AB_im: entry (A, B) of spin matrix J, row-major",
    "energy_re, energy_im: Hamiltonian",
    "casK_drift: max over field blocks of |tr B^K(t) - tr B^K(0)|",
    "min_gap: smallest relative eigenvalue gap of the monodromy (nan for the integrator)",
]


def _casimir_drift(traj: Trajectory) -> np.ndarray:
    C = np.asarray(traj.casimirs)
    if len(C) == 0:
        return np.zeros((0, 4))
    return np.max(np.abs(C - C[0][None]), axis=1)


def _rows(traj: Trajectory):
    drift = _casimir_drift(traj)
    for i in range(len(traj.t)):
        row = [float(traj.t[i])]
        for z in np.concatenate([traj.q[i], traj.p[i], np.ravel(traj.spins[i])]):
            row += [z.real, z.imag]
        e = complex(traj.energy[i])
        row += [e.real, e.imag]
        row += [float(d) for d in drift[i]]
        row.append(float(traj.gap[i]))
        yield row


def _header(doc: dict, source: str, config: SystemConfig, note: str | None) -> list[str]:
    lines = [
        "cmgauge trajectory",
        f"schema_version: {SCHEMA_VERSION}",
        f"config_sha256: {canonical_hash(doc)}",
        f"source: {source}",
        f"variant: {config.variant.kind} N={config.N} m={len(config.variant.spins0)}",
    ]
    lines += [f"column {c}" for c in COLUMN_MEANINGS]
    if note:
        lines.append(f"status: {note}")
    return lines


def write_csv(path: Path, traj: Trajectory | None, doc: dict, config: SystemConfig, source: str,
              note: str | None = None) -> None:
    n, m = config.N, len(config.variant.spins0)
    out = ["# " + line for line in _header(doc, source, config, note)]
    out.append(",".join(trajectory_columns(n, m)))
    if traj is not None:
        out += [",".join(_fmt(x) for x in row) for row in _rows(traj)]
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def write_jsonl(path: Path, traj: Trajectory | None, doc: dict, config: SystemConfig,
                source: str, note: str | None = None) -> None:
    n, m = config.N, len(config.variant.spins0)
    head = {"header": _header(doc, source, config, note), "schema_version": SCHEMA_VERSION,
            "config_sha256": canonical_hash(doc), "source": source,
            "columns": trajectory_columns(n, m)}
    lines = [json.dumps(head, sort_keys=True)]
    if traj is not None:
        drift = _casimir_drift(traj)

        def pairs(a):
            a = np.asarray(a, dtype=complex)
            return np.stack([a.real, a.imag], axis=-1).tolist()

        for i in range(len(traj.t)):
            gap = float(traj.gap[i])
            rec = {"t": float(traj.t[i]), "q": pairs(traj.q[i]), "p": pairs(traj.p[i]),
                   "spins": pairs(traj.spins[i]), "energy": pairs(traj.energy[i]),
                   "casimir_drift": [float(d) for d in drift[i]],
                   "min_gap": gap if math.isfinite(gap) else None}
            lines.append(json.dumps(rec, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# run

def _output_dir(args_dir: str | None, default: Path) -> Path:
    if args_dir:
        return Path(args_dir)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return default


def _targets(doc: dict, config_path: Path, out_dir: str | None) -> dict[str, Path]:
    out = doc["output"]
    fmt = out.get("format", "csv")
    base = Path(out["path"]) if "path" in out else Path(config_path.stem + "." + fmt)
    directory = _output_dir(out_dir, base.parent)
    stem = base.stem if base.suffix else base.name
    suffix = base.suffix or "." + fmt
    if doc.get("solver", "exact") == "both":
        return {"exact": directory / f"{stem}.exact{suffix}",
                "oracle": directory / f"{stem}.oracle{suffix}",
                "report": directory / f"{stem}.compare.json"}
    return {doc.get("solver", "exact"): directory / f"{stem}{suffix}"}


def _run_oracle(config: SystemConfig, doc: dict, times) -> Trajectory:
    settings = IntegratorSettings(**doc.get("integrator", {}))
    if isinstance(config.variant, PiecewiseExp):
        return integrate_field(config, settings, times)
    return integrate(config, settings, times)


def cmd_run(args) -> int:
    from .verify import compare_trajectories

    path = Path(args.config)
    try:
        doc = load_run_config(path)
        times = output_times(doc["output"])
        config = system_from_dict(doc["system"], float(times[-1]) if times[-1] > 0 else 1.0)
        IntegratorSettings(**doc.get("integrator", {}))
        targets = _targets(doc, path, args.output_dir)
    except (ConfigFormatError, ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = doc["output"].get("format", "csv")
    writer = write_csv if fmt == "csv" else write_jsonl
    for p in targets.values():
        p.parent.mkdir(parents=True, exist_ok=True)

    status = EXIT_OK
    results = {}
    for source in ("exact", "oracle"):
        if source not in targets:
            continue
        try:
            traj = solve(config, times) if source == "exact" else _run_oracle(config, doc, times)
            writer(targets[source], traj, doc, config, traj.source)
            results[source] = traj
        except CollisionDetected as exc:
            writer(targets[source], exc.partial, doc, config, source,
                   note=f"collision near t={exc.t:.6g}; trajectory truncated")
            print(f"collision: {exc}", file=sys.stderr)
            status = EXIT_COLLISION
        except (CollisionSingularity, StepLimitExceeded) as exc:
            writer(targets[source], None, doc, config, source, note=f"integration stopped: {exc}")
            print(f"collision: {exc}", file=sys.stderr)
            status = EXIT_COLLISION
        print(targets[source])
    if "report" in targets and len(results) == 2:
        rep = compare_trajectories(config, results["exact"], results["oracle"])
        body = {"schema_version": SCHEMA_VERSION, "config_sha256": canonical_hash(doc),
                "report": rep.as_record()}
        targets["report"].write_text(json.dumps(body, indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
        print(targets["report"])
        print(rep.line(), file=sys.stderr)
        if not rep.passed and status == EXIT_OK:
            status = EXIT_CHECK
    return status


# ---------------------------------------------------------------------------
# verification

def _write_report(name: str, reps, seed: int, extra: dict, out_dir: str | None,
                  filename: str | None = None) -> Path:
    directory = _output_dir(out_dir, Path("."))
    directory.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, "suite": name, "seed": seed,
            "passed": all(r.passed for r in reps),
            "reports": [r.as_record() for r in reps], **extra}
    path = directory / (filename or f"verify-{name}.json")
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def cmd_verify(args) -> int:
    from .verify import load_corpus, run_suite

    try:
        corpus = load_corpus(args.corpus)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: corpus: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    reps = run_suite(args.suite, args.seed, corpus)
    for r in reps:
        print(r.line())
    extra = {"corpus": [e.name for e in corpus]}
    path = _write_report(args.suite, reps, args.seed, extra, args.output_dir)
    bad = [r for r in reps if not r.passed]
    print(f"{len(reps) - len(bad)}/{len(reps)} checks passed; report {path}")
    for r in bad:
        print(f"failed: {r.name} [{r.instance}] {r.detail}", file=sys.stderr)
    return EXIT_CHECK if bad else EXIT_OK


def cmd_identities(args) -> int:
    from .verify import check_identities

    rep = check_identities(args.samples, args.seed)
    print(rep.line())
    path = _write_report("identities", [rep], args.seed, {"samples": args.samples},
                         args.output_dir, filename="identities.json")
    print(f"report {path}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    ap = _Parser(prog="cmgauge", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="solve a run configuration and write trajectories")
    r.add_argument("config", help="JSON run configuration")
    r.add_argument("--output-dir", help=f"directory for outputs (default ${OUTPUT_ENV})")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a verification suite on the regression corpus")
    v.add_argument("suite", choices=sorted(SUITES) + ["all"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--corpus", help="corpus JSON (default: the built-in one)")
    v.add_argument("--output-dir", help=f"directory for the report (default ${OUTPUT_ENV})")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("identities", help="lattice-sum identities at random points")
    i.add_argument("--samples", type=int, default=100)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--output-dir", help=f"directory for the report (default ${OUTPUT_ENV})")
    i.set_defaults(func=cmd_identities)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
