"""Seeded round-loop Monte Carlo engine and metric extraction."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .adversary import (
    DELAY_STRATEGIES,
    AttackStrategy,
    ChainStateClass,
    check_pairing,
    classify_state,
    delay_action,
    forking_action,
)
from .core import BlockTree, ModelViolation, ProposerKind
from .protocol import (
    PROPOSE_NOTHING,
    OutcomeKind,
    ProtocolVariant,
    ReplicaView,
    RoundOutcome,
    certify_round,
    honest_proposal,
)


class ConfigError(ValueError):
    """Invalid simulation configuration; the message names the broken invariant."""


class SafetyViolation(RuntimeError):
    """Committed blocks conflict or a replica rule was broken during a run."""


@dataclass(frozen=True)
class SimConfig:
    n: int
    f: int
    variant: ProtocolVariant
    strategy: AttackStrategy
    rounds: int
    seed: int = 0
    runs: int = 1
    unsafe: bool = False
    # admit alpha = 1/3 exactly (n = 3f), used when the leader fraction is given directly
    allow_boundary: bool = False

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.f, self.n)

    @property
    def beta(self) -> Fraction:
        return 1 - self.alpha

    def validate(self) -> "SimConfig":
        if self.n < 1 or self.f < 0 or self.f > self.n:
            raise ConfigError(f"need 0 <= f <= n and n >= 1 (n={self.n}, f={self.f})")
        if not self.unsafe:
            if self.allow_boundary and self.n >= 3 * self.f and self.f < self.n:
                pass
            elif self.n < 3 * self.f + 1:
                raise ConfigError(f"n >= 3f + 1 violated: n={self.n}, 3f+1={3 * self.f + 1}")
            if self.rounds < 10:
                raise ConfigError(f"rounds >= 10 violated: rounds={self.rounds}")
        if self.f == self.n and not self.unsafe:
            raise ConfigError("alpha = 1 requires the unsafe override")
        if self.rounds < 1 or self.runs < 1:
            raise ConfigError("rounds and runs must be positive")
        try:
            check_pairing(self.variant, self.strategy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["strategy"] = self.strategy.value
        return d


def leader_sequence(seed: int, m: int, alpha: float) -> np.ndarray:
    """i.i.d. leader draws, True meaning an honest leader.

    Uses numpy's PCG64 generator seeded with ``seed``; a draw ``u < 1 - alpha``
    is honest.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    beta = 1.0 - float(alpha)
    draws = np.random.default_rng(seed).random(m)
    return draws < beta


def read_leader_file(path: str | os.PathLike) -> np.ndarray:
    """Load an ``H``/``A`` per round leader file."""
    with open(path, encoding="ascii") as fh:
        text = "".join(fh.read().split())
    bad = set(text) - {"H", "A"}
    if bad:
        raise ConfigError(f"leader file may only contain H and A, found {sorted(bad)}")
    if not text:
        raise ConfigError("leader file is empty")
    return np.frombuffer(text.encode(), dtype=np.uint8) == ord("H")


def write_leader_file(path: str | os.PathLike, leaders: Sequence[bool]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("".join("H" if x else "A" for x in leaders) + "\n")


@dataclass
class MetricsReport:
    rounds: int
    honest_in_chain: int
    adversarial_in_chain: int
    nil_in_chain: int
    overridden: int
    timeouts: int
    latency_samples: list[int] = field(default_factory=list)
    censored: int = 0

    @property
    def growth(self) -> float:
        return self.honest_in_chain / self.rounds

    @property
    def quality(self) -> float:
        total = self.honest_in_chain + self.adversarial_in_chain
        return self.honest_in_chain / total if total else float("nan")

    @property
    def latency(self) -> float:
        if not self.latency_samples:
            return float("nan")
        return sum(self.latency_samples) / len(self.latency_samples)

    def metric(self, name: str) -> float:
        return {"growth": self.growth, "quality": self.quality, "latency": self.latency}[name]


@dataclass(frozen=True)
class TraceRecord:
    round: int
    leader: str
    action: str
    outcome: str
    state_class: int
    commits: tuple[int, ...]
    locked_round: int
    newest_certified_round: int

    HEADER = "round,leader,action,outcome,state,commits,locked_round,newest_certified_round"

    def csv(self) -> str:
        commits = " ".join(map(str, self.commits))
        return (
            f"{self.round},{self.leader},{self.action},{self.outcome},S{self.state_class},{commits},"
            f"{self.locked_round},{self.newest_certified_round}"
        )


@dataclass
class RunResult:
    report: MetricsReport
    tree: BlockTree
    view: ReplicaView
    tip: int
    trace: list[TraceRecord]


def _tip_class(last: Optional[RoundOutcome], tree: BlockTree, view: ReplicaView, tip: int) -> ChainStateClass:
    return classify_state(last, tree, view.committed, tip)


def simulate_run(
    config: SimConfig,
    leaders: Sequence[bool],
    *,
    trace: bool = False,
    check: bool = True,
) -> RunResult:
    """Run ``len(leaders)`` rounds and measure growth, quality and latency.

    The main chain at the horizon is the path from the chain tip (the
    newest certified block, or under LibraBFT the voted proposal still
    waiting for its QC) back to genesis.
    """
    variant = config.variant
    strategy = config.strategy
    needs_class = strategy in DELAY_STRATEGIES or trace
    tree = BlockTree()
    view = ReplicaView()
    pending: Optional[int] = None
    last: Optional[RoundOutcome] = None
    records: list[TraceRecord] = []
    timeouts = 0
    m = len(leaders)
    honest_kind = ProposerKind.HONEST
    adversarial_kind = ProposerKind.ADVERSARIAL
    prev_lock = 0

    for r in range(1, m + 1):
        honest = bool(leaders[r - 1])
        state = None
        if needs_class:
            tip = pending if pending is not None else tree.newest_certified
            state = _tip_class(last, tree, view, tip)
        cooperative = honest or strategy is not AttackStrategy.DELAY_LIBRA
        if pending is not None and cooperative:
            # the next leader assembles the QC before it builds its own proposal
            tree.certify(pending)
            view.newest_certified = tree.newest_certified
        if honest or strategy is AttackStrategy.NONE:
            action = honest_proposal(view, tree)
        elif strategy is AttackStrategy.FORKING:
            action = forking_action(tree, view.locked_round)
        elif strategy is AttackStrategy.SILENT:
            action = PROPOSE_NOTHING
        else:
            action = delay_action(strategy, state, tree)

        kind = honest_kind if honest else adversarial_kind
        outcome, _settled, pending, commits = certify_round(variant, kind, action, tree, view, r, pending)
        if outcome.kind is OutcomeKind.TIMEOUT:
            timeouts += 1
        last = outcome
        if check:
            if view.locked_round < prev_lock:
                raise SafetyViolation(f"locked_round decreased at round {r}")
            prev_lock = view.locked_round
        if trace:
            records.append(
                TraceRecord(
                    r,
                    "H" if honest else "A",
                    action.kind.value + ("+withhold" if action.withhold else ""),
                    outcome.kind.value,
                    int(state),
                    tuple(tree.blocks[b].round for b, _ in commits),
                    view.locked_round,
                    tree.blocks[tree.newest_certified].round,
                )
            )

    tip = pending if pending is not None else tree.newest_certified
    report = _measure(tree, view, tip, m, timeouts)
    if check:
        _check_safety(tree, view, tip)
    return RunResult(report, tree, view, tip, records)


def _measure(tree: BlockTree, view: ReplicaView, tip: int, m: int, timeouts: int) -> MetricsReport:
    honest = adversarial = nil = 0
    on_chain = set()
    for block in tree.ancestors(tip):
        on_chain.add(block.id)
        kind = block.proposer
        if kind is ProposerKind.HONEST:
            honest += 1
        elif kind is ProposerKind.ADVERSARIAL:
            adversarial += 1
        elif kind is ProposerKind.NIL:
            nil += 1
    blocks = tree.blocks
    samples = [
        commit_round - blocks[block_id].round
        for block_id, commit_round in view.commit_log
        if blocks[block_id].proposer is ProposerKind.HONEST
    ]
    committed_honest = len(samples)
    overridden = len(blocks) - len(on_chain)
    report = MetricsReport(
        rounds=m,
        honest_in_chain=honest,
        adversarial_in_chain=adversarial,
        nil_in_chain=nil,
        overridden=overridden,
        timeouts=timeouts,
        latency_samples=samples,
        censored=honest - committed_honest,
    )
    if honest + adversarial + nil + overridden + timeouts != m:
        raise ModelViolation("round accounting does not add up to the horizon")
    return report


def _check_safety(tree: BlockTree, view: ReplicaView, tip: int) -> None:
    on_chain = {b.id for b in tree.ancestors(tip)}
    stray = view.committed - on_chain
    if stray:
        raise SafetyViolation(f"committed blocks off the main chain: {sorted(stray)[:5]}")
    for block_id in view.committed:
        parent = tree.blocks[block_id].parent
        if parent is not None and parent not in view.committed:
            raise SafetyViolation(f"committed block {block_id} has an uncommitted parent")


def run_many(config: SimConfig, leaders: Optional[Sequence[bool]] = None) -> list[MetricsReport]:
    """Run ``config.runs`` independent runs; run ``i`` uses seed ``seed + i``."""
    reports = []
    for i in range(config.runs):
        seq = leaders if leaders is not None else leader_sequence(config.seed + i, config.rounds, float(config.alpha))
        reports.append(simulate_run(config, seq).report)
    return reports


METRICS = ("growth", "quality", "latency")


@dataclass
class MetricSummary:
    mean: float
    std: Optional[float]
    ci95: Optional[float]


@dataclass
class AggregateReport:
    runs: int
    metrics: dict[str, MetricSummary]
    censored: int
    config: Optional[dict] = None
    theory: dict[str, Optional[float]] = field(default_factory=dict)


def aggregate(reports: Sequence[MetricsReport], config: Optional[SimConfig] = None) -> AggregateReport:
    """Mean, sample std and normal-approximation 95% half-width over runs."""
    if not reports:
        raise ValueError("aggregate needs at least one report")
    if len({r.rounds for r in reports}) != 1:
        raise ValueError("reports come from different horizons")
    metrics = {}
    for name in METRICS:
        values = np.array([r.metric(name) for r in reports], dtype=float)
        mean = float(values.mean())
        if len(values) < 2:
            metrics[name] = MetricSummary(mean, None, None)
            continue
        std = float(values.std(ddof=1))
        metrics[name] = MetricSummary(mean, std, 1.96 * std / math.sqrt(len(values)))
    return AggregateReport(
        runs=len(reports),
        metrics=metrics,
        censored=sum(r.censored for r in reports),
        config=config.to_dict() if config is not None else None,
    )
