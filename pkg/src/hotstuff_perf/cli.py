"""Command-line front end: simulate, theory, compare, exact and sweep.

Exit codes: 0 success, 2 configuration error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .adversary import DELAY_FOR_VARIANT, AttackStrategy, ConfigurationError
from .analysis.exact import ExactUsageError, exact_finite_horizon
from .analysis.table import THEORY_COLUMNS, theory_rows
from .analysis.theory import UnsupportedTheory, theory_value
from .core import ModelViolation, StructuralError
from .protocol import ProtocolVariant
from .simulator import (
    METRICS,
    ConfigError,
    SafetyViolation,
    SimConfig,
    TraceRecord,
    aggregate,
    leader_sequence,
    read_leader_file,
    simulate_run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

REPORT_COLUMNS = (
    "n", "f", "alpha", "variant", "strategy", "metric", "mean", "std", "ci95",
    "theory", "abs_gap", "runs", "rounds", "seed", "censored",
)
COMPARE_COLUMNS = REPORT_COLUMNS + ("within_ci", "note")
EXACT_COLUMNS = (
    "variant", "strategy", "alpha", "rounds", "mode", "honest", "adversarial",
    "delay_sum", "committed", "growth", "latency",
)

# widely quoted figure for pipelined HotStuff latency at alpha = 1/3; it disagrees with the closed form
PROSE_HOTSTUFF_LATENCY = 8.33

ATTACKS = ("none", "silent", "forking", "delay") + tuple(s.value for s in DELAY_FOR_VARIANT.values())
COMMANDS = ("simulate", "theory", "compare", "exact", "sweep")
FILE_KEYS = {
    "n", "f", "alpha", "variant", "attack", "rounds", "runs", "seed", "leader_file",
    "format", "output", "unsafe", "grid", "trace", "mode", "window", "from_alpha",
}
# keys of an echoed spec that carry no settings
ECHO_ONLY_KEYS = {"command", "version"}


@dataclass
class ExperimentSpec:
    command: str
    n: int = 16
    f: int = 0
    variant: Optional[str] = None
    attack: str = "none"
    rounds: int = 100_000
    runs: int = 10
    seed: int = 0
    leader_file: Optional[str] = None
    format: str = "csv"
    output: Optional[str] = None
    unsafe: bool = False
    grid: Optional[list[int]] = None
    trace: Optional[str] = None
    mode: str = "dp"
    window: int = 6
    from_alpha: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def protocol(self) -> ProtocolVariant:
        return ProtocolVariant(self.variant or "hotstuff")

    @property
    def strategy(self) -> AttackStrategy:
        return resolve_attack(self.attack, self.protocol)

    def sim_config(self, f: Optional[int] = None) -> SimConfig:
        return SimConfig(
            n=self.n,
            f=self.f if f is None else f,
            variant=self.protocol,
            strategy=self.strategy,
            rounds=self.rounds,
            seed=self.seed,
            runs=self.runs,
            unsafe=self.unsafe,
            allow_boundary=self.from_alpha,
        )

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("warnings")
        d["version"] = __version__
        return d


def resolve_attack(name: str, variant: ProtocolVariant) -> AttackStrategy:
    if name == "delay":
        return DELAY_FOR_VARIANT[variant]
    try:
        return AttackStrategy(name)
    except ValueError:
        raise ConfigError(f"unknown attack {name!r}") from None


def _parse_alpha(text: str) -> Fraction:
    try:
        alpha = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"alpha must be a rational like 1/3, got {text!r}") from None
    if not 0 <= alpha <= 1:
        raise argparse.ArgumentTypeError("alpha must lie in [0, 1]")
    return alpha


def _parse_grid(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--n", type=int, help="number of replicas (default 16)")
    common.add_argument("--f", type=int, help="number of Byzantine replicas (default 0)")
    common.add_argument("--alpha", type=_parse_alpha, help="adversarial leader fraction as f/n, sets --n and --f")
    common.add_argument("--variant", choices=[v.value for v in ProtocolVariant])
    common.add_argument("--attack", choices=ATTACKS, help="'delay' picks the delay attack matching the variant")
    common.add_argument("--rounds", type=int, help="rounds per run (default 100000)")
    common.add_argument("--runs", type=int, help="independent runs (default 10)")
    common.add_argument("--seed", type=int, help="base seed; run i uses seed + i (default 0)")
    common.add_argument("--leader-file", dest="leader_file", help="H/A leader sequence; bypasses the PRNG")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--output", help="report path (default stdout)")
    common.add_argument("--unsafe", action="store_true", default=None, help="skip n >= 3f+1 and rounds >= 10 checks")
    common.add_argument("--grid", type=_parse_grid, help="comma-separated f values for sweep")
    common.add_argument("--trace", help="write a per-round trace of the first run to this CSV path")
    common.add_argument("--mode", choices=("enumerate", "dp"), help="exact oracle mode (default dp)")
    common.add_argument("--window", type=int, help="tail window of the DP oracle (default 6)")

    parser = argparse.ArgumentParser(prog="hotstuff-perf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Monte Carlo runs with aggregated metrics",
        "theory": "closed-form table, no simulation",
        "compare": "simulation joined with theory",
        "exact": "exact finite-horizon expectations",
        "sweep": "compare rows for every f in a grid",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_config(argv: Sequence[str]) -> ExperimentSpec:
    """Flags override values from ``--config``, which override built-in defaults."""
    args = build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - FILE_KEYS - ECHO_ONLY_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in loaded.items() if k not in ECHO_ONLY_KEYS})
        if "alpha" in values:
            values["alpha"] = _parse_alpha(str(values["alpha"]))
        if isinstance(values.get("grid"), str):
            values["grid"] = _parse_grid(values["grid"])
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        values[key] = value
    alpha = values.pop("alpha", None)
    if alpha is not None:
        if alpha.denominator == 1 and alpha.numerator == 0:
            values.setdefault("n", 16)
            values["f"] = 0
        else:
            values["n"], values["f"] = alpha.denominator, alpha.numerator
        values["from_alpha"] = True
    spec = ExperimentSpec(command=args.command, **values)
    _validate(spec)
    return spec


def _validate(spec: ExperimentSpec) -> None:
    try:
        spec.strategy  # rejects unknown attack names early
        if spec.command in ("simulate", "compare", "exact"):
            spec.sim_config().validate()
        if spec.command == "sweep":
            spec.grid = sorted(spec.grid) if spec.grid is not None else list(range((spec.n - 1) // 3 + 1))
            for f in spec.grid:
                spec.sim_config(f).validate()
        if spec.command == "theory":
            if not 0 <= spec.f <= spec.n or spec.n < 1:
                raise ConfigError(f"need 0 <= f <= n (n={spec.n}, f={spec.f})")
            for f in spec.grid or []:
                if not 0 <= f < spec.n:
                    raise ConfigError(f"grid value {f} outside 0 <= f < n")
        if spec.variant is None and spec.command != "theory":
            spec.variant = "hotstuff"
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from None
    if spec.window < 4:
        raise ConfigError("window >= 4 violated")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.12g}"
    if isinstance(value, Fraction):
        return f"{float(value):.12g}"
    return str(value)


def _clean(value):
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _theory(metric: str, beta: Fraction, variant: ProtocolVariant, strategy: AttackStrategy, warnings: list[str]):
    try:
        return theory_value(metric, beta, variant, strategy)
    except UnsupportedTheory:
        msg = f"no closed form for {metric} under {variant.value}/{strategy.value}"
        if msg not in warnings:
            warnings.append(msg)
        return None


def _simulate(spec: ExperimentSpec, f: Optional[int] = None):
    config = spec.sim_config(f)
    if spec.leader_file:
        leaders = read_leader_file(spec.leader_file)
        config = SimConfig(config.n, config.f, config.variant, config.strategy, len(leaders),
                           config.seed, 1, config.unsafe, config.allow_boundary).validate()
        sequences = [leaders]
    else:
        config.validate()
        sequences = (leader_sequence(config.seed + i, config.rounds, float(config.alpha)) for i in range(config.runs))
    reports = []
    for i, leaders in enumerate(sequences):
        want_trace = spec.trace is not None and i == 0
        result = simulate_run(config, leaders, trace=want_trace)
        if want_trace:
            with open(spec.trace, "w", encoding="utf-8") as fh:
                fh.write(TraceRecord.HEADER + "\n")
                for record in result.trace:
                    fh.write(record.csv() + "\n")
        reports.append(result.report)
    return config, aggregate(reports, config)


def _report_rows(spec: ExperimentSpec, config: SimConfig, agg, compare: bool) -> list[dict]:
    rows = []
    for metric in METRICS:
        summary = agg.metrics[metric]
        theory = _theory(metric, config.beta, config.variant, config.strategy, spec.warnings)
        mean = _clean(summary.mean)
        gap = abs(mean - float(theory)) if theory is not None and mean is not None else None
        row = {
            "n": config.n,
            "f": config.f,
            "alpha": float(config.alpha),
            "variant": config.variant.value,
            "strategy": config.strategy.value,
            "metric": metric,
            "mean": mean,
            "std": _clean(summary.std),
            "ci95": _clean(summary.ci95),
            "theory": _clean(theory),
            "abs_gap": gap,
            "runs": agg.runs,
            "rounds": config.rounds,
            "seed": config.seed,
            "censored": agg.censored,
        }
        if compare:
            row["within_ci"] = gap is not None and row["ci95"] is not None and gap <= row["ci95"]
            row["note"] = _note(config, metric)
        rows.append(row)
    return rows


def _note(config: SimConfig, metric: str) -> str:
    if (
        metric == "latency"
        and config.strategy is AttackStrategy.DELAY_HOTSTUFF
        and config.alpha == Fraction(1, 3)
    ):
        closed = float(theory_value("latency", config.beta, config.variant, config.strategy))
        return (
            f"published figure {PROSE_HOTSTUFF_LATENCY} is inconsistent with the closed form "
            f"{closed:.4f}; the closed form is used"
        )
    return ""


def run_command(spec: ExperimentSpec) -> tuple[int, dict]:
    """Execute ``spec`` and return the exit status and the report document."""
    columns: Sequence[str]
    notes: list[str] = []
    if spec.command == "theory":
        fs = spec.grid if spec.grid is not None else [spec.f]
        variants = [ProtocolVariant(spec.variant)] if spec.variant else list(ProtocolVariant)
        rows = theory_rows([Fraction(f, spec.n) for f in fs], variants)
        columns = THEORY_COLUMNS
    elif spec.command == "exact":
        config = spec.sim_config()
        result = exact_finite_horizon(config.variant, config.strategy, config.beta, spec.rounds, spec.mode, spec.window)
        row = {"variant": config.variant.value, "strategy": config.strategy.value, "alpha": float(config.alpha),
               "mode": spec.mode}
        row.update({k: _clean(v) for k, v in result.as_dict().items()})
        rows = [row]
        columns = EXACT_COLUMNS
    elif spec.command == "sweep":
        rows = []
        for f in spec.grid:
            config, agg = _simulate(spec, f)
            rows.extend(_report_rows(spec, config, agg, compare=True))
        columns = COMPARE_COLUMNS
    else:
        compare = spec.command == "compare"
        config, agg = _simulate(spec)
        rows = _report_rows(spec, config, agg, compare)
        columns = COMPARE_COLUMNS if compare else REPORT_COLUMNS
    for row in rows:
        if row.get("note"):
            notes.append(row["note"])
    document = {
        "command": spec.command,
        "version": __version__,
        "spec": spec.echo(),
        "columns": list(columns),
        "rows": [{k: _clean(row.get(k)) for k in columns} for row in rows],
        "warnings": list(spec.warnings),
        "notes": notes,
    }
    return EXIT_OK, document


def render(document: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(document, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(document["columns"])
    for row in document["rows"]:
        writer.writerow([_fmt(row[c]) for c in document["columns"]])
    return buf.getvalue()


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        spec = parse_config(argv)
        status, document = run_command(spec)
    except SystemExit as exc:
        # argparse reports unknown flags and bad values with status 2
        return int(exc.code or 0)
    except (SafetyViolation, ModelViolation, StructuralError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, ExactUsageError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for warning in document["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    for note in document["notes"]:
        print(f"note: {note}", file=sys.stderr)
    text = render(document, spec.format)
    if spec.output:
        with open(spec.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
