"""Command line entry point: ``calogero simulate | verify | describe``.

Exit codes: 0 all checks pass, 2 tolerance failure, 3 singularity or
truncated trajectory, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import PhaseState, constraint_residual
from .errors import CalogeroError, CapabilityError, ConfigError, PreconditionError, SingularityError
from .models import describe as describe_entry
from .models import get_model, model_from_descriptor, random_state
from .rmatrix import eval_r
from .solver import compare_runs, drift, integrate_rk4, solve_geodesic
from .verify import SUITES, run_suite, worker_count

EXIT_OK, EXIT_TOLERANCE, EXIT_SINGULAR, EXIT_CONFIG = 0, 2, 3, 4

SOLVERS = ("geodesic", "rk4", "both")


@dataclass
class RunConfig:
    """Simulation settings.  ``model`` is a catalogue name or a descriptor
    ``{family, rank, form, automorphism}``; ``initial`` holds either explicit
    ``{q, p, xi}`` or ``{seed, scale}`` for a random constrained state."""

    model: object
    initial: dict = field(default_factory=lambda: {"seed": 0})
    t_end: float = 1.0
    samples: int = 101
    dt: float = 1e-3
    solver: str = "both"
    tolerance: float = 1e-6
    output_dir: str = "."
    prefix: str = "run"

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "model" not in d:
            raise ConfigError("config needs a 'model'")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        try:
            self.t_end = float(self.t_end)
            self.dt = float(self.dt)
            self.tolerance = float(self.tolerance)
            self.samples = int(self.samples)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not (self.t_end > 0 and self.dt > 0 and self.samples >= 2 and self.tolerance > 0):
            raise ConfigError("t_end, dt and tolerance must be positive and samples >= 2")
        if not isinstance(self.initial, dict):
            raise ConfigError("'initial' must be an object")
        if not isinstance(self.model, (str, dict)):
            raise ConfigError("'model' must be a name or a descriptor object")

    def entry(self):
        try:
            if isinstance(self.model, str):
                return get_model(self.model)
            return model_from_descriptor(self.model)
        except (CapabilityError, PreconditionError) as exc:
            raise ConfigError(str(exc)) from None

    def initial_state(self, entry):
        init = self.initial
        if {"q", "p", "xi"} <= set(init):
            try:
                state = PhaseState(init["q"], init["p"], init["xi"], init.get("t", 0.0))
            except (PreconditionError, ValueError, TypeError) as exc:
                raise ConfigError(f"bad initial state: {exc}") from None
            if state.q.shape != (entry.split.r,) or state.xi.shape != (entry.model.dim,):
                raise ConfigError("initial state does not match the model dimensions")
            if constraint_residual(entry.spec, state) > 1e-10:
                raise ConfigError("initial state violates xi_K = 0")
            return state
        if "seed" in init:
            rng = np.random.default_rng(int(init["seed"]))
            return random_state(entry, rng, scale=float(init.get("scale", 0.5)))
        raise ConfigError("'initial' needs {q, p, xi} or {seed}")


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def simulate(cfg: RunConfig, out=None):
    entry = cfg.entry()
    state0 = cfg.initial_state(entry)
    eval_r(entry.spec, state0.q)             # fail fast on a singular base point
    times = np.linspace(state0.t, state0.t + cfg.t_end, cfg.samples)
    wanted = ["geodesic", "rk4"] if cfg.solver == "both" else [cfg.solver]

    def run(kind):
        if kind == "geodesic":
            return solve_geodesic(entry.spec, state0, times)
        return integrate_rk4(entry.spec, state0, times, cfg.dt)

    with ThreadPoolExecutor(max_workers=min(len(wanted), worker_count())) as pool:
        records = dict(zip(wanted, pool.map(run, wanted)))

    report = {"model": entry.name, "config": cfg.to_dict(), "runs": {}}
    for kind, rec in records.items():
        report["runs"][kind] = {"solver": rec.solver, "samples": len(rec),
                                "truncated": rec.truncated, "message": rec.message,
                                "drift": drift(rec) if len(rec) else {},
                                "diagnostics": rec.diagnostics}
    status = EXIT_OK
    if len(records) == 2:
        cmp = compare_runs(records["geodesic"], records["rk4"], cfg.tolerance)
        report["comparison"] = cmp.to_dict()
        if not cmp.passed:
            status = EXIT_TOLERANCE
    if any(r.truncated for r in records.values()):
        status = EXIT_SINGULAR
    report["exit_code"] = status

    files = {}
    for kind, rec in records.items():
        files[os.path.join(cfg.output_dir, f"{cfg.prefix}_{kind}.csv")] = rec.to_csv()
    files[os.path.join(cfg.output_dir, f"{cfg.prefix}_report.json")] = _dumps(report)
    for path, text in files.items():
        _atomic_write(path, text)
    print(_dumps({k: report[k] for k in report if k != "config"}), file=out or sys.stdout)
    return status


def verify(suite, seed, samples, corrupt=False, out=None, output=None):
    checks = run_suite(suite, seed, samples, corrupt)
    report = {"suite": suite, "seed": seed, "samples": samples, "corrupted_r": corrupt,
              "passed": all(c.passed for c in checks),
              "failures": sum(not c.passed for c in checks),
              "checks": [c.to_dict() for c in checks]}
    text = _dumps(report)
    if output:
        _atomic_write(output, text)
    print(text, file=out or sys.stdout)
    return EXIT_OK if report["passed"] else EXIT_TOLERANCE


def describe(name, q=None, operator_csv=None, out=None):
    entry = get_model(name)
    if q is None:
        q = random_state(entry, np.random.default_rng(0)).q
    info = describe_entry(entry, q)
    op = eval_r(entry.spec, q).operator
    sp = entry.split
    info["R_K_block_max"] = float(np.max(np.abs(op @ sp.k_basis)))
    if operator_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(entry.model.labels)
        w.writerows([[f"{v:.17g}" for v in row] for row in op])
        _atomic_write(operator_csv, buf.getvalue())
        info["operator_csv"] = operator_csv
    print(_dumps(info), file=out or sys.stdout)
    return EXIT_OK


def _parse_q(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"--q expects comma-separated numbers, got {text!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="calogero",
                                 description="Spin Calogero models from dynamical r-matrices")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a trajectory with one or both solvers")
    sim.add_argument("-c", "--config", required=True, help="JSON run configuration")

    ver = sub.add_parser("verify", help="run invariant batteries")
    ver.add_argument("--suite", default="all", choices=SUITES + ("all",))
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--samples", type=int, default=100)
    ver.add_argument("--corrupt-r", action="store_true",
                     help="scale R by 1.1 (detector sanity check; failures expected)")
    ver.add_argument("-o", "--output", help="also write the JSON report here")

    des = sub.add_parser("describe", help="dump model data as JSON")
    des.add_argument("--model", required=True)
    des.add_argument("--q", help="reference point as comma-separated K-coordinates")
    des.add_argument("--operator-csv", help="write R(q) in the model basis to this CSV")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(str(exc)) from None
            return simulate(RunConfig.from_json(text))
        if args.command == "verify":
            if args.samples < 1:
                raise ConfigError("--samples must be positive")
            return verify(args.suite, args.seed, args.samples, args.corrupt_r,
                          output=args.output)
        q = _parse_q(args.q) if args.q else None
        try:
            return describe(args.model, q, args.operator_csv)
        except (CapabilityError, PreconditionError) as exc:
            raise ConfigError(str(exc)) from None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as exc:
        print(f"singular point: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except CalogeroError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
