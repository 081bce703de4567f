"""Experiment harness: build nets, verify layer-wise bounds, estimate moduli,
run parameter sweeps and export weights.

Every flag mirrors an :class:`ExperimentConfig` field.  ``--config FILE``
reads an INI file whose ``[experiment]`` section may set any field; flags
given on the command line override it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import Holder, estimate_modulus, modulus_csv, verify_bounds
from .decoder import FitBudget
from .geometry import DeltaSelectionError, GeometryError, PartitionConfig, choose_delta
from .multigrade import (
    BuildFailure,
    DecoderMode,
    MultigradeNet,
    build,
    count_parameters,
    dense_parameter_count,
    export_weights,
    stack_width,
)
from .quadrature import CellAverageEngine
from .targets import GridFormatError, TargetSpec, get_target, load_target, target_names

SWEEP_SCHEMA = "layerwise-sweep/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run; equal configs give identical files."""

    target: str = "ramp"
    d: int = 1
    N: int = 2
    L: int = 4
    p: float = 2.0
    delta: str = "default"  # "default", "auto" or a number
    decoder: str = "table"  # "table" or "sine"
    eps: float = 1e-2
    fallback: bool = True
    n_max: int = 10**7
    w_candidates: int = 256
    bound: str = "auto"  # "auto", "modulus" or "holder"
    quadrature: str = "auto"  # "auto", "tensor" or "monte-carlo"
    resolution: int = 0  # 0 keeps the scheme's default
    out: str = "runs/latest"
    seed: int = 0

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        """Coerce string values and validate; collects every field problem."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        problems = [f"unknown field {k!r}" for k in data if k not in fields]
        values = {}
        for name, f in fields.items():
            if name not in data or data[name] is None:
                continue
            raw = data[name]
            try:
                values[name] = _coerce(f.type, raw)
            except ValueError:
                problems.append(f"{name}: cannot read {raw!r} as {f.type}")
        if problems:
            raise UsageError("; ".join(problems))
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        problems = []
        if self.d < 1:
            problems.append("d: must be >= 1")
        if self.N < 2:
            problems.append("N: must be >= 2")
        if self.L < 0:
            problems.append("L: must be >= 0")
        if not self.p >= 1 or math.isinf(self.p):
            problems.append("p: must be a finite number >= 1")
        if self.decoder not in ("table", "sine"):
            problems.append("decoder: must be 'table' or 'sine'")
        if self.bound not in ("auto", "modulus", "holder"):
            problems.append("bound: must be 'auto', 'modulus' or 'holder'")
        if self.quadrature not in ("auto", "tensor", "monte-carlo"):
            problems.append("quadrature: must be 'auto', 'tensor' or 'monte-carlo'")
        if not self.eps > 0:
            problems.append("eps: must be positive")
        if self.resolution < 0:
            problems.append("resolution: must be >= 0")
        if self.delta not in ("default", "auto"):
            try:
                float(self.delta)
            except ValueError:
                problems.append("delta: must be 'default', 'auto' or a number")
        if problems:
            raise UsageError("; ".join(problems))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(kind: str, raw):
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return str(raw)


# -- running ---------------------------------------------------------------


def resolve_target(cfg: ExperimentConfig) -> TargetSpec:
    name = cfg.target.partition(":")[0]
    if name not in target_names():
        path = Path(cfg.target)
        if not path.is_file():
            raise UsageError(f"target: {cfg.target!r} is neither a known target ({', '.join(target_names())}) nor a grid file")
        try:
            spec = load_target(path)
        except GridFormatError as exc:
            raise UsageError(f"target: {path}: {exc}") from None
        if spec.d != cfg.d:
            raise UsageError(f"d: grid file has d={spec.d}, config has d={cfg.d}")
        return spec
    try:
        return get_target(cfg.target, cfg.d)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"target: {exc}") from None


def engines(cfg: ExperimentConfig) -> tuple[CellAverageEngine, CellAverageEngine]:
    cells = CellAverageEngine.for_cells(cfg.d, cfg.seed)
    norms = CellAverageEngine.for_norms(cfg.d, cfg.seed)
    if cfg.quadrature != "auto":
        res = cfg.resolution or (8 if cfg.quadrature == "tensor" else 4096)
        cells = CellAverageEngine(cfg.quadrature, res, "midpoint", 0, cfg.seed)
    elif cfg.resolution:
        cells = dataclasses.replace(cells, resolution=cfg.resolution)
    return cells, norms


def partition(cfg: ExperimentConfig, spec: TargetSpec) -> tuple[PartitionConfig, dict]:
    try:
        if cfg.delta == "default":
            return PartitionConfig(cfg.d, cfg.N, cfg.L), {"policy": "default"}
        if cfg.delta == "auto":
            omega = estimate_modulus(spec.target, float(cfg.N) ** (-cfg.L), cfg.p).value
            eta = max(omega / 2.0, 1e-12)
            choice = choose_delta(spec.target, cfg.d, cfg.N, cfg.L, cfg.p, eta)
            info = {"policy": "auto", "eta": eta, "margin": choice.margin, "trials": choice.trials}
            return PartitionConfig(cfg.d, cfg.N, cfg.L, choice.delta), info
        return PartitionConfig(cfg.d, cfg.N, cfg.L, float(cfg.delta)), {"policy": "explicit"}
    except GeometryError as exc:
        raise UsageError(f"partition: {exc}") from None


def decoder_mode(cfg: ExperimentConfig) -> DecoderMode:
    budget = FitBudget(n_max=cfg.n_max, w_candidates=cfg.w_candidates, seed=cfg.seed)
    return DecoderMode(cfg.decoder, cfg.eps, budget, cfg.fallback)


def bound_mode(cfg: ExperimentConfig, spec: TargetSpec):
    if cfg.bound == "modulus" or (cfg.bound == "auto" and spec.holder is None):
        return "modulus"
    if spec.holder is None:
        raise UsageError(f"bound: target {spec.name!r} has no known Hoelder constant")
    return Holder(*spec.holder)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def build_net(cfg: ExperimentConfig) -> tuple[TargetSpec, MultigradeNet, dict]:
    spec = resolve_target(cfg)
    config, delta_info = partition(cfg, spec)
    cells, _ = engines(cfg)
    net = build(spec.target, config, cfg.p, cells, decoder_mode(cfg))
    return spec, net, delta_info


def parameter_summary(net: MultigradeNet) -> dict:
    cfg = net.config
    width = stack_width(cfg.d, cfg.N)
    out = {
        "width": width,
        "depth": cfg.L + 2,
        "dense_parameters": dense_parameter_count(cfg.d, cfg.N, cfg.L),
        "width_squared_times_depth": width * width * (cfg.L + 2),
        "exported": False,
    }
    try:
        stack = export_weights(net)
    except TypeError:
        return out
    out.update(
        exported=True,
        stack_width=stack.width,
        parameters=count_parameters(stack),
        nonzero_parameters=count_parameters(stack, nonzero=True),
    )
    return out


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Build, verify and write the artifact bundle; returns the summary."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    summary = {"config": config, "passed": False}
    try:
        spec, net, delta_info = build_net(cfg)
    except BuildFailure as exc:
        summary.update(error=str(exc), partial_levels=len(exc.partial.grades))
        (out / "net.json").write_text(exc.partial.dumps() + "\n")
        (out / "summary.json").write_text(_dump(summary))
        return summary
    except DeltaSelectionError as exc:
        summary.update(error=str(exc))
        (out / "summary.json").write_text(_dump(summary))
        return summary
    _, norms = engines(cfg)
    report = verify_bounds(spec.target, net, cfg.p, bound_mode(cfg, spec), norms)
    params = parameter_summary(net)
    if params["exported"]:
        net.weight_stack = export_weights(net)
    (out / "bound_report.csv").write_text(report.to_csv())
    (out / "modulus.csv").write_text(modulus_csv(report.moduli))
    (out / "net.json").write_text(net.dumps() + "\n")
    (out / "params.json").write_text(_dump(params))
    summary.update(
        passed=report.passed,
        mode=report.mode,
        delta=net.config.delta,
        delta_selection=delta_info,
        levels=[{"level": r.level, "passed": r.passed, "measured_error": r.measured_error, "bound": r.bound} for r in report.rows],
        decoders=[{"level": g.level, "kind": g.decoder.to_dict()["kind"], "achieved_eps": g.decoder.achieved_eps} for g in net.grades],
        notes=report.notes,
        tolerances=report.tolerances,
    )
    (out / "summary.json").write_text(_dump(summary))
    return summary


SWEEP_FIELDS = ["target", "d", "N", "L", "p", "level", "measured_error", "bound", "tolerance", "passed", "error"]


def sweep(base: ExperimentConfig, Ns, Ls, ps, targets) -> tuple[str, bool]:
    """Cross product of runs as one CSV (ordered target, N, L, p, level)."""
    grid = list(itertools.product(targets, Ns, Ls, ps))
    if not grid:
        raise UsageError("sweep: empty grid")
    buf = io.StringIO()
    buf.write(f"# schema: {SWEEP_SCHEMA}\n")
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    ok = True
    for target, N, L, p in grid:
        cfg = dataclasses.replace(base, target=target, N=int(N), L=int(L), p=float(p))
        key = {"target": target, "d": cfg.d, "N": cfg.N, "L": cfg.L, "p": repr(cfg.p)}
        try:
            cfg.validate()
            spec, net, _ = build_net(cfg)
            _, norms = engines(cfg)
            report = verify_bounds(spec.target, net, cfg.p, bound_mode(cfg, spec), norms)
        except (UsageError, BuildFailure, DeltaSelectionError, GeometryError) as exc:
            ok = False
            writer.writerow({**key, "level": "", "measured_error": "", "bound": "", "tolerance": "", "passed": False, "error": str(exc)})
            continue
        for r in report.rows:
            ok &= r.passed
            writer.writerow({
                **key,
                "level": r.level,
                "measured_error": repr(r.measured_error),
                "bound": repr(r.bound),
                "tolerance": repr(r.tolerance),
                "passed": r.passed,
                "error": "",
            })
    return buf.getvalue(), ok


# -- argument parsing ------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI file with an [experiment] section")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None, help=f"default: {f.default!r}")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(args.config):
            raise UsageError(f"config: cannot read {args.config}")
        if "experiment" not in parser:
            raise UsageError("config: missing [experiment] section")
        data.update(parser["experiment"])
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    return ExperimentConfig.from_mapping(data)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layerwise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("build", "build a net and write net.json and params.json"),
        ("verify", "build, verify every level and write the full bundle"),
        ("export-weights", "build with sine decoders and write the weight stack"),
    ]:
        _add_config_flags(sub.add_parser(name, help=help_text))
    mod = sub.add_parser("modulus", help="estimate the L^p modulus at given scales")
    _add_config_flags(mod)
    mod.add_argument("--t", dest="scales", default="0.5,0.25,0.125", help="comma-separated scales")
    sw = sub.add_parser("sweep", help="cross product of runs as one CSV")
    _add_config_flags(sw)
    sw.add_argument("--Ns", default="2", help="comma-separated N values")
    sw.add_argument("--Ls", default="4", help="comma-separated L values")
    sw.add_argument("--ps", default="2", help="comma-separated p values")
    sw.add_argument("--targets", default="ramp", help="comma-separated target names")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        out = Path(cfg.out)
        if args.command == "verify":
            summary = run_experiment(cfg)
            print(_dump({k: summary[k] for k in ("passed", "levels", "error") if k in summary}), end="")
            return EXIT_OK if summary["passed"] else EXIT_FAIL
        if args.command == "build":
            _, net, _ = build_net(cfg)
            out.mkdir(parents=True, exist_ok=True)
            (out / "net.json").write_text(net.dumps() + "\n")
            (out / "params.json").write_text(_dump(parameter_summary(net)))
            print(out / "net.json")
            return EXIT_OK
        if args.command == "export-weights":
            cfg = dataclasses.replace(cfg, decoder="sine", fallback=False)
            _, net, _ = build_net(cfg)
            out.mkdir(parents=True, exist_ok=True)
            (out / "weights.json").write_text(export_weights(net).dumps() + "\n")
            print(out / "weights.json")
            return EXIT_OK
        if args.command == "modulus":
            spec = resolve_target(cfg)
            scales = _floats(args.scales)
            if not scales:
                raise UsageError("t: need at least one scale")
            text = modulus_csv([estimate_modulus(spec.target, t, cfg.p) for t in scales])
            out.mkdir(parents=True, exist_ok=True)
            (out / "modulus.csv").write_text(text)
            print(text, end="")
            return EXIT_OK
        if args.command == "sweep":
            text, ok = sweep(cfg, _floats(args.Ns), _floats(args.Ls), _floats(args.ps), [t for t in args.targets.split(",") if t])
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.csv").write_text(text)
            print(out / "sweep.csv")
            return EXIT_OK if ok else EXIT_FAIL
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BuildFailure, DeltaSelectionError) as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
