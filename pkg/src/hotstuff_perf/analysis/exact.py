"""Exact finite-horizon expectations of the run totals.

Two independent routes:

* ``enumerate`` runs the simulator on every one of the 2^m leader sequences
  and weights each by beta^h alpha^a. Feasible up to m = 24.
* ``dp`` propagates a probability-weighted automaton over the uncommitted
  tail of the main chain. Blocks that drop out of the tail window are folded
  into linear accumulators, so the state space stays small and the horizon
  can reach 10^6 rounds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional

import numpy as np
from scipy import sparse

from ..adversary import AttackStrategy, check_pairing
from ..protocol import ProtocolVariant
from ..simulator import SimConfig, simulate_run

ENUMERATION_LIMIT = 24


class ExactUsageError(ValueError):
    """The requested mode cannot handle this horizon or combination."""


@dataclass(frozen=True)
class ExactResult:
    rounds: int
    honest: float
    adversarial: float
    delay_sum: float
    committed: float

    @property
    def growth(self) -> float:
        return self.honest / self.rounds

    @property
    def latency(self) -> float:
        """Ratio of expected total delay to expected number of committed honest blocks."""
        return self.delay_sum / self.committed if self.committed else float("nan")

    def as_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "honest": self.honest,
            "adversarial": self.adversarial,
            "delay_sum": self.delay_sum,
            "committed": self.committed,
            "growth": self.growth,
            "latency": self.latency,
        }


def enumerate_expectations(
    variant: ProtocolVariant, strategy: AttackStrategy, beta: float | Fraction, m: int
) -> ExactResult:
    if m > ENUMERATION_LIMIT:
        raise ExactUsageError(f"enumeration is limited to m <= {ENUMERATION_LIMIT}, got {m}")
    check_pairing(variant, strategy)
    beta = Fraction(beta) if isinstance(beta, (Fraction, int)) else float(beta)
    alpha = 1 - beta
    config = SimConfig(4, 1, variant, strategy, m, unsafe=True)
    totals = [0, 0, 0, 0]
    for leaders in product((True, False), repeat=m):
        h = sum(leaders)
        weight = beta**h * alpha ** (m - h)
        if weight == 0:
            continue
        report = simulate_run(config, leaders).report
        totals[0] += weight * report.honest_in_chain
        totals[1] += weight * report.adversarial_in_chain
        totals[2] += weight * sum(report.latency_samples)
        totals[3] += weight * len(report.latency_samples)
    return ExactResult(m, *(float(t) for t in totals))


# accumulator rows of the DP vector
P, BH, BA, SUMD, NCOM, AGGN, AGGG, AGE = range(8)


def _age(v: np.ndarray, n: int) -> None:
    v[AGGG] += v[AGGN]
    v[AGE : AGE + n] += v[P]


def _commit_prefix(v: np.ndarray, entries: list, last: int, width: int) -> None:
    """Commit window entries ``0..last`` together with everything folded before them."""
    for i in range(last + 1):
        kind = entries[i][0]
        if kind == "H":
            v[BH] += v[P]
            v[SUMD] += v[AGE + i]
            v[NCOM] += v[P]
        elif kind == "A":
            v[BA] += v[P]
    v[SUMD] += v[AGGG]
    v[NCOM] += v[AGGN]
    v[AGGN] = 0
    v[AGGG] = 0
    _shift(v, last + 1, width)


def _shift(v: np.ndarray, k: int, width: int) -> None:
    v[AGE : AGE + width - k] = v[AGE + k : AGE + width].copy()
    v[AGE + width - k : AGE + width] = 0


def _fold_oldest(v: np.ndarray, entries: list, width: int) -> None:
    kind = entries[0][0]
    if kind == "H":
        v[BH] += v[P]
        v[AGGN] += v[P]
        v[AGGG] += v[AGE]
    elif kind == "A":
        v[BA] += v[P]
    _shift(v, 1, width)


class _TailModel:
    """One-round transition of the tail automaton.

    A state is ``(entries, lock, pending, timeout)``: ``entries`` lists the
    uncommitted main-chain blocks as ``(kind, consecutive)`` pairs, oldest
    first, where kind is G, H, A or N and ``consecutive`` says the block's
    round is its parent's plus one. ``lock`` indexes the locked block.
    """

    def __init__(self, variant: ProtocolVariant, strategy: AttackStrategy, window: int) -> None:
        if window < 4:
            raise ExactUsageError("the tail window must hold at least 4 blocks")
        self.variant = variant
        self.strategy = strategy
        self.window = window
        self.width = AGE + window

    @staticmethod
    def initial():
        return ((("G", False),), 0, False, False)

    def step(self, state, honest: bool, v: np.ndarray):
        """Apply one round to the accumulator block ``v`` in place; return the next state."""
        entries, lock, pending, timeout = state
        ents = list(entries)
        width = self.window
        slots = width + 1
        variant, strategy = self.variant, self.strategy
        libra = variant is ProtocolVariant.LIBRABFT
        _age(v, len(ents))

        def run_class() -> int:
            if timeout:
                return 0
            run = 1
            i = len(ents) - 1
            while i > 0 and ents[i][1]:
                run += 1
                i -= 1
            return min(run, 3)

        def append(kind: str, consec: bool) -> None:
            nonlocal lock
            ents.append((kind, consec))
            # voting for it locks on its grandparent
            if len(ents) >= 3:
                lock = max(lock, len(ents) - 3)

        def commit_from_parent() -> None:
            n = len(ents)
            if n >= 4 and ents[n - 2][1] and ents[n - 3][1]:
                _commit_prefix(v, ents, n - 4, slots)
                shift_out(n - 3)

        def commit_at_tip() -> None:
            n = len(ents)
            if n >= 3 and ents[n - 1][1] and ents[n - 2][1]:
                _commit_prefix(v, ents, n - 3, slots)
                shift_out(n - 2)

        def shift_out(k: int) -> None:
            nonlocal lock
            del ents[:k]
            lock -= k

        def truncate(keep: int) -> None:
            del ents[keep:]
            v[AGE + keep : AGE + slots] = 0

        cls = run_class()
        adversarial = not honest and strategy is not AttackStrategy.NONE
        new_timeout = False

        if not adversarial:
            kind = "H" if honest else "A"
            if libra:
                append(kind, not timeout)
                commit_from_parent()
                pending = True
            else:
                append(kind, not timeout)
                if variant is ProtocolVariant.BROADCAST_QC:
                    lock = max(lock, len(ents) - 2)
                    commit_at_tip()
                else:
                    commit_from_parent()
        elif strategy is AttackStrategy.FORKING:
            pending = False
            target = lock
            for i in range(len(ents) - 1, lock - 1, -1):
                if ents[i][0] == "A":
                    target = i
                    break
            at_tip = target == len(ents) - 1
            truncate(target + 1)
            append("A", at_tip and not timeout)
            if libra:
                commit_from_parent()
                pending = True
            elif variant is ProtocolVariant.BROADCAST_QC:
                lock = max(lock, len(ents) - 2)
                commit_at_tip()
            else:
                commit_from_parent()
        elif strategy is AttackStrategy.SILENT:
            if libra:
                append("N", not timeout)
                commit_from_parent()
                pending = False
            else:
                new_timeout = True
        elif strategy is AttackStrategy.DELAY_HOTSTUFF:
            if cls == 3:
                truncate(len(ents) - 1)
                append("A", False)
                commit_from_parent()
            else:
                new_timeout = True
        elif strategy is AttackStrategy.DELAY_LIBRA:
            if pending and cls == 3:
                truncate(len(ents) - 1)
            pending = False
            new_timeout = True
        else:
            new_timeout = True

        while len(ents) > width:
            _fold_oldest(v, ents, slots)
            shift_out(1)
        if lock < 0 or lock >= len(ents):
            raise ExactUsageError("locked block left the tail window; increase the window")
        return (tuple(ents), lock, pending, new_timeout)

    def build(self, beta: float):
        """Reachable states and the sparse one-round operator over stacked accumulators."""
        start = self.initial()
        index = {start: 0}
        order = [start]
        queue = deque([start])
        rows, cols, vals = [], [], []
        w = self.width
        alpha = 1.0 - beta
        while queue:
            state = queue.popleft()
            s = index[state]
            for honest, prob in ((True, beta), (False, alpha)):
                if prob == 0:
                    continue
                # one extra age slot absorbs the momentary overflow
                block = np.eye(w + 1)
                nxt = self.step(state, honest, block)
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                t = index[nxt]
                nz = np.nonzero(block[:w, :w])
                rows.extend(t * w + nz[0])
                cols.extend(s * w + nz[1])
                vals.extend(prob * block[:w, :w][nz])
        size = len(order) * w
        matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
        return order, matrix


def dp_expectations(
    variant: ProtocolVariant,
    strategy: AttackStrategy,
    beta: float | Fraction,
    m: int,
    window: int = 6,
) -> ExactResult:
    check_pairing(variant, strategy)
    model = _TailModel(variant, strategy, window)
    order, matrix = model.build(float(beta))
    w = model.width
    vec = np.zeros(len(order) * w)
    vec[P] = 1.0
    for _ in range(m):
        vec = matrix @ vec
    totals = np.zeros(w)
    for i, (entries, _lock, _pending, _timeout) in enumerate(order):
        v = vec[i * w : (i + 1) * w]
        totals += v
        # blocks still in the window sit on the main chain at the horizon
        totals[BH] += v[P] * sum(1 for e in entries if e[0] == "H")
        totals[BA] += v[P] * sum(1 for e in entries if e[0] == "A")
    return ExactResult(m, float(totals[BH]), float(totals[BA]), float(totals[SUMD]), float(totals[NCOM]))


def exact_finite_horizon(
    variant: ProtocolVariant,
    strategy: AttackStrategy,
    beta: float | Fraction,
    m: int,
    mode: str = "dp",
    window: Optional[int] = None,
) -> ExactResult:
    if mode == "enumerate":
        return enumerate_expectations(variant, strategy, beta, m)
    if mode == "dp":
        return dp_expectations(variant, strategy, beta, m, window or 6)
    raise ExactUsageError(f"unknown mode {mode!r}; use 'enumerate' or 'dp'")


