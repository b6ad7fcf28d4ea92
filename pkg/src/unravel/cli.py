"""``unravel`` command line: run, compare, enumerate-t0, scan.

Exit codes: 0 success, 1 configuration error, 2 runtime error (for
``compare``: 2 also when an error/SE ratio exceeds the threshold).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, UnravelError
from .initial import InitialSpec, check_spec_dim, enumerate_initial_outcomes, initial_density, initial_to_json, parse_initial
from .jumps import JumpConfig, resolve_rate
from .models import PRESETS
from .runner import ENGINES, EnsembleResult, compare_to_oracle, convergence_scan, run_ensemble
from .state import SplitHamiltonian, load_model_file, model_from_dict, model_to_dict
from .stats import finalize_trace

PRESET_PARAMS = {
    "two-level": ("eps", "delta"),
    "epr-decay": ("eps_e", "eps_p", "g"),
    "random": ("dim", "seed", "free_scale", "int_scale"),
}


@dataclass
class RunConfig:
    model: dict[str, Any] = field(default_factory=lambda: {"preset": "two-level"})
    initial: dict[str, Any] | None = None
    engine: str = "two-process"
    rate: float | str = "auto"
    hbar: float = 1.0
    sample_times: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0])
    trajectories: int = 10_000
    seed: int = 0
    workers: int = 1
    out: str | None = None
    format: str = "json"
    threshold: float = 5.0
    jump_scale: float = 1.0  # mutation-test hook, never written to output unless != 1

    def as_dict(self) -> dict[str, Any]:
        d = {
            "model": self.model,
            "initial": self.initial,
            "engine": self.engine,
            "rate": self.rate,
            "hbar": self.hbar,
            "sample_times": self.sample_times,
            "trajectories": self.trajectories,
            "seed": self.seed,
            "workers": self.workers,
        }
        if self.jump_scale != 1.0:
            d["jump_scale"] = self.jump_scale
        return d


@dataclass
class Resolved:
    cfg: RunConfig
    H: SplitHamiltonian
    spec: InitialSpec
    jump: JumpConfig
    model_doc: dict[str, Any]

    def metadata(self) -> dict[str, Any]:
        conf = self.cfg.as_dict()
        conf["initial"] = initial_to_json(self.spec)
        conf["rate"] = self.jump.rate
        return {
            "version": f"unravel v{__version__}",
            "config": conf,
            "resolved_rate": self.jump.rate,
            "rate_setting": self.cfg.rate,
            "model": self.model_doc,
        }


# --- config handling -------------------------------------------------------------------


def _load_json(path: str, what: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read {what}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _parse_times(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--times: {exc}") from exc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file first, then flag overrides (flags win)."""
    cfg = RunConfig()
    workers_set = False
    if args.config:
        doc = _load_json(args.config, "config")
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        known = set(RunConfig.__dataclass_fields__)
        for key, value in doc.items():
            if key not in known:
                raise ConfigError(f"{args.config}: unknown config key {key!r}")
            setattr(cfg, key, value)
        workers_set = "workers" in doc
        if isinstance(cfg.model, str):
            cfg.model = {"preset": cfg.model}
    if args.model_file:
        cfg.model = {"file": args.model_file}
    elif args.model:
        cfg.model = {"preset": args.model}
    if "preset" in cfg.model:
        for p in PRESET_PARAMS.get(cfg.model["preset"], ()):
            flag = "model_seed" if p == "seed" else p
            value = getattr(args, flag, None)
            if value is not None:
                cfg.model[p] = value
    if args.initial is not None:
        try:
            cfg.initial = json.loads(args.initial)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--initial: {exc.msg} at column {exc.colno}") from exc
    for flag, key in (
        ("engine", "engine"),
        ("hbar", "hbar"),
        ("trajectories", "trajectories"),
        ("seed", "seed"),
        ("workers", "workers"),
        ("out", "out"),
        ("format", "format"),
        ("threshold", "threshold"),
        ("debug_jump_scale", "jump_scale"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.rate is not None:
        cfg.rate = args.rate if args.rate == "auto" else _float_flag("--rate", args.rate)
    if args.times is not None:
        cfg.sample_times = _parse_times(args.times)
    if args.workers is None and not workers_set:
        env = os.environ.get("UNRAVEL_WORKERS")
        if env:
            try:
                cfg.workers = int(env)
            except ValueError as exc:
                raise ConfigError(f"UNRAVEL_WORKERS must be an integer, got {env!r}") from exc
    return cfg


def _float_flag(name: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: expected a number or 'auto', got {value!r}") from exc


def build_model(model: dict[str, Any], hbar: float) -> tuple[SplitHamiltonian, InitialSpec | None, dict[str, Any]]:
    if "file" in model:
        H = load_model_file(model["file"])
        if H.hbar != hbar:
            raise ConfigError(f"model file hbar {H.hbar} differs from run hbar {hbar}")
        return H, None, {"file": model["file"], **model_to_dict(H)}
    if "preset" in model:
        name = model["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        params = {k: v for k, v in model.items() if k != "preset"}
        unknown = set(params) - set(PRESET_PARAMS[name])
        if unknown:
            raise ConfigError(f"preset {name!r} does not take {sorted(unknown)}")
        if name == "random" and ("dim" not in params or "seed" not in params):
            raise ConfigError("preset 'random' needs dim and seed (--dim, --model-seed)")
        call = dict(params)
        if isinstance(call.get("g"), list) and len(call["g"]) == 2:
            call["g"] = complex(*call["g"])
        preset = PRESETS[name](**call, hbar=hbar)
        return preset.hamiltonian, preset.default_initial, {"preset": name, **params, **model_to_dict(preset.hamiltonian)}
    if "dim" in model:
        H = model_from_dict(model)
        if H.hbar != hbar:
            raise ConfigError(f"model hbar {H.hbar} differs from run hbar {hbar}")
        return H, None, model_to_dict(H)
    raise ConfigError("model must name a preset, a file, or inline dim/free_energies/interaction")


def resolve(cfg: RunConfig) -> Resolved:
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}")
    if not isinstance(cfg.trajectories, int) or cfg.trajectories < 1:
        raise ConfigError("trajectories must be a positive integer")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError("workers must be a positive integer")
    if cfg.format not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    H, default_initial, model_doc = build_model(cfg.model, float(cfg.hbar))
    if cfg.initial is None:
        if default_initial is None:
            raise ConfigError("model files need an explicit initial state (--initial)")
        spec = default_initial
    else:
        spec = parse_initial(cfg.initial)
    check_spec_dim(spec, H.dim)
    try:
        rate = resolve_rate(H, cfg.rate)
        jump = JumpConfig(rate, tuple(cfg.sample_times), float(cfg.hbar))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Resolved(cfg, H, spec, jump, model_doc)


# --- output -----------------------------------------------------------------------------


def _pairs(m: np.ndarray) -> list[list[list[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def result_document(res: Resolved, result: EnsembleResult) -> dict[str, Any]:
    entries = []
    for ti, t in enumerate(res.jump.sample_times):
        mean, se = result.density(ti)
        item: dict[str, Any] = {"t": t, "rho": _pairs(mean), "se": _pairs(se)}
        if result.acc.count >= 2:
            tr, tr_se = finalize_trace(result.acc, ti)
            item["trace"] = [tr.real, tr.imag]
            item["trace_se"] = [tr_se.real, tr_se.imag]
        entries.append(item)
    doc = {
        **res.metadata(),
        "trajectories": result.acc.count,
        "jumps": result.jumps,
        "audit": {
            "samples_checked": result.audited,
            "failures": result.audit_failures,
        },
        "results": entries,
    }
    if result.ensembles is not None:
        from .triplets import ensemble_to_json

        doc["compressed_ensembles"] = [ensemble_to_json(e) for e in result.ensembles]
    return doc


def result_csv(res: Resolved, result: EnsembleResult) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(res.metadata(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "row", "col", "re", "im", "se_re", "se_im"])
    for ti, t in enumerate(res.jump.sample_times):
        mean, se = result.density(ti)
        for i in range(mean.shape[0]):
            for j in range(mean.shape[1]):
                w.writerow([repr(t), i, j, repr(float(mean[i, j].real)), repr(float(mean[i, j].imag)),
                            repr(float(se[i, j].real)), repr(float(se[i, j].imag))])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _execute(res: Resolved) -> EnsembleResult:
    c = res.cfg
    return run_ensemble(
        res.H, res.spec, res.jump, c.trajectories, int(c.seed),
        engine=c.engine, workers=c.workers, factor_scale=float(c.jump_scale),
    )


# --- subcommands --------------------------------------------------------------------------


def cmd_run(res: Resolved) -> int:
    result = _execute(res)
    if res.cfg.format == "csv":
        text = result_csv(res, result)
    else:
        text = json.dumps(result_document(res, result), indent=1, sort_keys=True) + "\n"
    _emit(text, res.cfg.out)
    return 0


def cmd_compare(res: Resolved) -> int:
    result = _execute(res)
    rows = compare_to_oracle(res.H, res.spec, result)
    buf = io.StringIO()
    buf.write("# " + json.dumps(res.metadata(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "frobenius_error", "combined_se", "ratio"])
    for r in rows:
        w.writerow([repr(r.t), f"{r.frobenius_error:.6e}", f"{r.combined_se:.6e}", f"{r.ratio:.4f}"])
    _emit(buf.getvalue(), res.cfg.out)
    worst = max(r.ratio for r in rows)
    ok = worst <= res.cfg.threshold
    print(f"{'PASS' if ok else 'FAIL'}: max error/SE ratio {worst:.3f} (threshold {res.cfg.threshold:g})",
          file=sys.stderr)
    return 0 if ok else 2


def cmd_enumerate_t0(res: Resolved) -> int:
    if res.H.dim > 6:
        raise ConfigError(f"enumerate-t0 supports dim <= 6, model has {res.H.dim}")
    d = res.H.dim
    mean = np.zeros((d, d), dtype=complex)
    outcomes = enumerate_initial_outcomes(res.spec)
    for p, phi, psi in outcomes:
        mean[phi.index, psi.index] += p * phi.prefactor * psi.prefactor.conjugate()
    rho0 = initial_density(res.spec, d)
    resid = float(np.linalg.norm(mean - rho0))
    doc = {
        "initial": initial_to_json(res.spec),
        "outcomes": len(outcomes),
        "expected_dyad": _pairs(mean),
        "rho0": _pairs(rho0),
        "residual": resid,
    }
    _emit(json.dumps(doc, indent=1) + "\n", res.cfg.out)
    return 0 if resid <= 1e-14 else 2


def cmd_scan(res: Resolved, m_list: Sequence[int], repeats: int) -> int:
    table = convergence_scan(
        res.H, res.spec, res.jump, m_list, int(res.cfg.seed),
        repeats=repeats, workers=res.cfg.workers, engine=res.cfg.engine,
    )
    _emit(table.to_markdown(), res.cfg.out)
    return 0


# --- parser ---------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON file; flags override its values")
    p.add_argument("--model", choices=sorted(PRESETS), help="preset model name")
    p.add_argument("--model-file", help="JSON model file")
    p.add_argument("--initial", help='initial state JSON, e.g. \'{"basis": 0}\'')
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--rate", help="jump rate or 'auto'")
    p.add_argument("--hbar", type=float)
    p.add_argument("--times", help="comma-separated sample times")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default $UNRAVEL_WORKERS or 1)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--threshold", type=float, help="compare: max allowed error/SE ratio (default 5)")
    g = p.add_argument_group("preset parameters")
    g.add_argument("--eps", type=float, help="two-level detuning")
    g.add_argument("--delta", type=float, help="two-level coupling")
    g.add_argument("--eps-e", type=float, help="epr-decay excitation energy")
    g.add_argument("--eps-p", type=float, help="epr-decay photon-pair energy")
    g.add_argument("--g", type=float, help="epr-decay coupling")
    g.add_argument("--dim", type=int, help="random model dimension")
    g.add_argument("--model-seed", type=int, help="random model seed")
    g.add_argument("--free-scale", type=float)
    g.add_argument("--int-scale", type=float)
    p.add_argument("--debug-jump-scale", type=float, help=argparse.SUPPRESS)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unravel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"unravel v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "simulate an ensemble and write density-matrix estimates"),
        ("compare", "simulate and compare against exact evolution"),
        ("enumerate-t0", "exact expectation of the initial-state sampling"),
        ("scan", "Frobenius error vs ensemble size (Markdown table)"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "scan":
            p.add_argument("--m-list", default="1000,4000,16000,64000")
            p.add_argument("--repeats", type=int, default=1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        res = resolve(build_config(args))
        m_list = [int(x) for x in args.m_list.split(",")] if args.command == "scan" else None
    except (UnravelError, ValueError, TypeError, KeyError) as exc:
        print(f"unravel: config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run":
            return cmd_run(res)
        if args.command == "compare":
            return cmd_compare(res)
        if args.command == "enumerate-t0":
            return cmd_enumerate_t0(res)
        return cmd_scan(res, m_list, args.repeats)
    except ConfigError as exc:
        print(f"unravel: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"unravel: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
