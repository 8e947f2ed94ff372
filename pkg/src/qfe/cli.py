"""Command-line front end.

All quantities are dimensionless with hbar = 1 and a unit magnetic moment.

Examples::

    qfe rf optimal --B 1 --omega 0.7 --T 2
    qfe rf feedback --B 1 --omega 1 --T 1 --N 100 --feedback-mode analytic
    qfe lz scan --Gamma 1 --xi 1 --T 1 --grid 0 3 301 --format csv --out scan.csv
    qfe lz optimize --config configs/lz_optimize.json
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import (
    ConstraintViolation,
    HermiticityError,
    NonIdentifiableError,
    QFEError,
    RegimeError,
    UnbracketedMinimum,
    UnitarityError,
)
from .evolve import DEFAULT_STEPS_PER_UNIT, GeneratorSet
from .models import landau_zener as lz
from .models import rotating_field as rf
from .qfi import PrecisionReport, precision_report
from .spin import J, plus_minus_state

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REGIME = 3
EXIT_NUMERICAL = 4

MODES = {
    "rotating_field": ("optimal", "uncontrolled", "practical", "feedback"),
    "landau_zener": ("scan", "optimize"),
}
MODEL_ALIASES = {"rf": "rotating_field", "lz": "landau_zener"}

REQUIRED = {
    ("rotating_field", "optimal"): ("B", "omega", "T"),
    ("rotating_field", "uncontrolled"): ("B", "omega", "T"),
    ("rotating_field", "practical"): ("B", "omega", "T", "B_c", "omega_c"),
    ("rotating_field", "feedback"): ("B", "omega", "T", "N"),
    ("landau_zener", "scan"): ("Gamma", "xi", "T"),
    ("landau_zener", "optimize"): ("Gamma", "xi", "T"),
}

SCAN_HEADER = "gamma,cost,F_GG,F_xx,F_Gx,saturation_residual"


class ConfigError(QFEError, ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class Numerics:
    steps_per_unit: int = DEFAULT_STEPS_PER_UNIT
    tol: float = 1e-6
    seed: int = 0
    samples: int = 100_000
    feedback_mode: str = "analytic"
    source: str = "closed_form"


@dataclass
class ExperimentConfig:
    model: str
    mode: str
    parameters: dict[str, float]
    grid: tuple[float, float, int] | None = None
    numerics: Numerics = field(default_factory=Numerics)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        model = MODEL_ALIASES.get(d.get("model"), d.get("model"))
        if model not in MODES:
            raise ConfigError("model", f"expected one of {sorted(MODES)}, got {d.get('model')!r}")
        mode = d.get("mode")
        if mode not in MODES[model]:
            raise ConfigError("mode", f"expected one of {MODES[model]} for {model}, got {mode!r}")
        params = {}
        for k, v in (d.get("parameters") or {}).items():
            try:
                params[k] = float(v)
            except (TypeError, ValueError):
                raise ConfigError(f"parameters.{k}", f"not a number: {v!r}") from None
        for k in REQUIRED[(model, mode)]:
            if k not in params:
                raise ConfigError(f"parameters.{k}", "required for this mode")
        grid = d.get("grid")
        if grid is not None:
            if isinstance(grid, dict):
                grid = (grid.get("min"), grid.get("max"), grid.get("points"))
            try:
                lo, hi, pts = float(grid[0]), float(grid[1]), int(grid[2])
            except (TypeError, ValueError, IndexError):
                raise ConfigError("grid", f"expected (min, max, points), got {grid!r}") from None
            if pts < 2:
                raise ConfigError("grid.points", "must be >= 2")
            if not lo < hi:
                raise ConfigError("grid", "min must be below max")
            grid = (lo, hi, pts)
        raw = dict(d.get("numerics") or {})
        unknown = set(raw) - set(Numerics.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"numerics.{sorted(unknown)[0]}", "unknown setting")
        for key, value in raw.items():
            kind = type(getattr(Numerics, key))
            try:
                if kind is int and float(value) != int(float(value)):
                    raise ValueError
                raw[key] = int(float(value)) if kind is int else kind(value)
            except (TypeError, ValueError):
                raise ConfigError(f"numerics.{key}", f"expected {kind.__name__}, got {value!r}") from None
        num = Numerics(**raw)
        if num.steps_per_unit < 2:
            raise ConfigError("numerics.steps_per_unit", "must be >= 2")
        if num.feedback_mode not in ("analytic", "monte_carlo"):
            raise ConfigError("numerics.feedback_mode", f"unknown mode {num.feedback_mode!r}")
        if num.source not in ("closed_form", "propagated"):
            raise ConfigError("numerics.source", f"unknown source {num.source!r}")
        return cls(model, mode, params, grid, num)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "mode": self.mode,
            "parameters": dict(self.parameters),
            "grid": list(self.grid) if self.grid is not None else None,
            "numerics": asdict(self.numerics),
        }


def _coefficients(gens: GeneratorSet) -> dict:
    """Generators expanded on (Jx, Jy, Jz); spin-1 has Tr(J_a J_b) = 2 delta_ab."""
    out = {}
    for name, m in gens.ops.items():
        out[name] = {
            axis: float(np.real(np.trace(m @ op)) / 2.0)
            for axis, op in (("Jx", J.jx), ("Jy", J.jy), ("Jz", J.jz))
        }
    return out


def _report(cfg: ExperimentConfig, rep: PrecisionReport, gens: GeneratorSet | None, **extra) -> dict:
    out = {"config": cfg.to_dict(), "precision": rep.to_dict()}
    if gens is not None:
        out["generators"] = _coefficients(gens)
    out.update(extra)
    return out


def _rf_params(cfg):
    p = cfg.parameters
    return rf.RotatingFieldParams(p["B"], p["omega"], p["T"])


def _lz_params(cfg):
    p = cfg.parameters
    return lz.LZParams(p["Gamma"], p["xi"], p["T"])


def _lz_grid(cfg):
    lo, hi, pts = cfg.grid if cfg.grid is not None else (0.0, 3.0, 301)
    return lo, hi, pts


def run(cfg: ExperimentConfig):
    """Dispatch a config to the model pipelines.

    Returns a JSON-ready dict, or a :class:`GammaScan` for LZ scans.
    """
    num = cfg.numerics
    try:
        if cfg.model == "rotating_field":
            p = _rf_params(cfg)
            if cfg.mode == "optimal":
                gens = rf.rf_optimal_generators(p, num.steps_per_unit)
                return _report(cfg, precision_report(plus_minus_state(), gens), gens)
            if cfg.mode == "uncontrolled":
                gens = rf.rf_closed_generators(p)
                return _report(cfg, rf.rf_uncontrolled_precision(p), gens)
            if cfg.mode == "practical":
                est = rf.ControlEstimates(cfg.parameters["B_c"], cfg.parameters["omega_c"])
                gens = rf.rf_practical_generators(p, est, num.steps_per_unit)
                return _report(cfg, precision_report(plus_minus_state(), gens), gens)
            if cfg.mode == "feedback":
                n = cfg.parameters["N"]
                if n != int(n):
                    raise ConfigError("parameters.N", "must be an integer")
                res = rf.rf_feedback_precision(p, int(n), num.feedback_mode, num.samples, num.seed)
                return {"config": cfg.to_dict(), "feedback": res.to_dict()}
        p = _lz_params(cfg)
        lo, hi, pts = _lz_grid(cfg)
        if cfg.mode == "scan":
            return lz.lz_scan(p, np.linspace(lo, hi, pts), source=num.source, steps_per_unit=num.steps_per_unit)
        opt = lz.lz_optimize_gamma(
            p, bracket=(lo, hi), tol=num.tol, points=pts, source=num.source, steps_per_unit=num.steps_per_unit
        )
        gens = lz.lz_generators(p, opt.gamma, num.source, num.steps_per_unit)
        return _report(cfg, opt.report, gens, optimum={"gamma": opt.gamma, "cost": opt.cost})
    except ValueError as exc:
        if isinstance(exc, QFEError):
            raise
        raise ConfigError("parameters", str(exc)) from exc


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17e}"


def render(result, fmt: str = "json") -> str:
    if isinstance(result, lz.GammaScan):
        if fmt == "json":
            rows = [dict(zip(SCAN_HEADER.split(","), r)) for r in result.rows()]
            return json.dumps({"scan": rows}, sort_keys=True, indent=2) + "\n"
        lines = [SCAN_HEADER] + [",".join(f"{v:.17e}" for v in r) for r in result.rows()]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps(result, sort_keys=True, indent=2) + "\n"
    flat: list = []
    _flatten("", result, flat)
    return "key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in flat)


def emit(result, fmt: str = "json", path: str | None = None) -> None:
    """Write ``result`` as JSON or CSV to ``path`` (stdout when None or '-').

    Files are written to a temporary sibling and renamed into place.
    """
    if fmt not in ("json", "csv"):
        raise ConfigError("format", f"expected json or csv, got {fmt!r}")
    text = render(result, fmt)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qfe-", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _check_flags(result) -> None:
    if isinstance(result, dict) and "precision" in result and not result["precision"]["attainable"]:
        raise ConstraintViolation(
            f"saturation condition violated: residual {result['precision']['saturation_residual']:.3e}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfe",
        description="Multi-parameter quantum Cramer-Rao limits under optimal control "
        "(dimensionless units: hbar = 1, unit magnetic moment).",
    )
    sub = parser.add_subparsers(dest="model", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config; flags override its values")
        p.add_argument("--T", type=float, help="interrogation time")
        p.add_argument("--steps", type=int, help=f"propagation steps per unit time (default {DEFAULT_STEPS_PER_UNIT})")
        p.add_argument("--tol", type=float, help="optimizer interval tolerance")
        p.add_argument("--seed", type=int, help="Monte-Carlo seed")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-reproducibility)")

    rfp = sub.add_parser("rf", help="spin-1 in a rotating magnetic field")
    rfp.add_argument("mode", choices=MODES["rotating_field"])
    common(rfp)
    rfp.add_argument("--B", type=float, help="field amplitude")
    rfp.add_argument("--omega", type=float, help="rotation frequency")
    rfp.add_argument("--B-c", dest="B_c", type=float, help="control estimate of B (practical)")
    rfp.add_argument("--omega-c", dest="omega_c", type=float, help="control estimate of omega (practical)")
    rfp.add_argument("--N", type=int, help="rounds per stage (feedback)")
    rfp.add_argument("--feedback-mode", choices=("analytic", "monte_carlo"))
    rfp.add_argument("--samples", type=int, help="Monte-Carlo samples (feedback)")

    lzp = sub.add_parser("lz", help="three-level Landau-Zener sweep")
    lzp.add_argument("mode", choices=MODES["landau_zener"])
    common(lzp)
    lzp.add_argument("--Gamma", type=float, help="level splitting at t=0")
    lzp.add_argument("--xi", type=float, help="sweep proportionality factor (nu = xi*Gamma)")
    lzp.add_argument("--grid", nargs=3, metavar=("MIN", "MAX", "POINTS"), help="gamma grid")
    lzp.add_argument("--source", choices=("closed_form", "propagated"), help="generator source")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
    else:
        base = {}
    model = MODEL_ALIASES[args.model]
    if base.get("model") not in (None, model, args.model):
        raise ConfigError("model", f"config is for {base['model']!r}, command is {args.model!r}")
    base["model"] = model
    base["mode"] = args.mode
    params = dict(base.get("parameters") or {})
    for name in ("B", "omega", "B_c", "omega_c", "N", "Gamma", "xi", "T"):
        val = getattr(args, name, None)
        if val is not None:
            params[name] = val
    base["parameters"] = params
    num = dict(base.get("numerics") or {})
    for flag, key in (("steps", "steps_per_unit"), ("tol", "tol"), ("seed", "seed"), ("samples", "samples"),
                      ("feedback_mode", "feedback_mode"), ("source", "source")):
        val = getattr(args, flag, None)
        if val is not None:
            num[key] = val
    base["numerics"] = num
    if getattr(args, "grid", None) is not None:
        base["grid"] = args.grid
    return ExperimentConfig.from_dict(base)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        start = time.perf_counter()
        result = run(cfg)
        _check_flags(result)
        if args.timing and isinstance(result, dict):
            result["wall_time_s"] = time.perf_counter() - start
        fmt = args.format or ("csv" if isinstance(result, lz.GammaScan) else "json")
        emit(result, fmt, args.out)
    except ConfigError as exc:
        print(f"qfe: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RegimeError, UnbracketedMinimum, ConstraintViolation) as exc:
        print(f"qfe: regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (HermiticityError, UnitarityError, NonIdentifiableError) as exc:
        print(f"qfe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"qfe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
