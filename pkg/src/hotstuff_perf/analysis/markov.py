"""Chain-state Markov models for the delay attacks.

States S0..S3 (S0..S2 for broadcast-QC) classify the chain tip: S0 after a
round that produced nothing, Si for i consecutive uncommitted blocks. The
hitting-time chains add an absorbing commit state.

Exact arithmetic is used when ``beta`` is a ``Fraction``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..protocol import ProtocolVariant
from .theory import Number, theory_latency
from ..adversary import DELAY_FOR_VARIANT, DELAY_STRATEGIES, AttackStrategy

Matrix = list[list[Number]]


def _solve_exact(a: Matrix, b: Sequence[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals."""
    n = len(a)
    rows = [[Fraction(x) for x in row] + [Fraction(b[i])] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return [rows[i][n] for i in range(n)]


def _solve(a: Matrix, b: Sequence[Number], exact: bool) -> list[Number]:
    if exact:
        return _solve_exact(a, b)
    return [float(x) for x in np.linalg.solve(np.array(a, dtype=float), np.array(b, dtype=float))]


def _is_exact(beta: Number) -> bool:
    return isinstance(beta, (Fraction, int))


@dataclass(frozen=True)
class MarkovModel:
    variant: ProtocolVariant
    beta: Number
    transition: Matrix
    stationary: tuple[Number, ...]

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(f"S{i}" for i in range(len(self.transition)))

    def balance_residual(self) -> Number:
        """max |pi T - pi| over states."""
        n = len(self.transition)
        pi = self.stationary
        return max(abs(sum(pi[i] * self.transition[i][j] for i in range(n)) - pi[j]) for j in range(n))


def transition_matrix(variant: ProtocolVariant, beta: Number) -> Matrix:
    b = Fraction(beta) if _is_exact(beta) else float(beta)
    a = 1 - b
    if variant is ProtocolVariant.BROADCAST_QC:
        return [[a, b, 0], [a, 0, b], [a, 0, b]]
    t = [[a, b, 0, 0], [a, 0, b, 0], [a, 0, 0, b], [0, 0, 0, b]]
    if variant is ProtocolVariant.HOTSTUFF:
        t[3][1] = a  # overriding the newest block leaves a run of one
    else:
        t[3][0] = a
    return t


def markov_model(variant: ProtocolVariant, strategy: AttackStrategy, beta: Number) -> MarkovModel:
    if strategy not in DELAY_STRATEGIES or DELAY_FOR_VARIANT[variant] is not strategy:
        raise ValueError(f"no chain-state model for {variant.value}/{strategy.value}")
    t = transition_matrix(variant, beta)
    n = len(t)
    # pi (T - I) = 0 with the last balance equation replaced by sum(pi) = 1
    a = [[t[i][j] - (1 if i == j else 0) for i in range(n)] for j in range(n)]
    a[-1] = [1] * n
    rhs = [0] * (n - 1) + [1]
    pi = _solve(a, rhs, _is_exact(beta))
    return MarkovModel(variant, beta, t, tuple(pi))


def stationary_closed_form(variant: ProtocolVariant, beta: Number) -> tuple[Number, ...]:
    b = beta
    if variant is ProtocolVariant.HOTSTUFF:
        d = b**3 - b**2 + 1
        return ((1 + b) * (1 - b) ** 2 / d, b * (1 - b) / d, b**2 * (1 - b) / d, b**3 / d)
    if variant is ProtocolVariant.LIBRABFT:
        return (1 - b, b * (1 - b), b**2 * (1 - b), b**3)
    return (1 - b, b * (1 - b), b**2)


@dataclass(frozen=True)
class HittingTimes:
    variant: ProtocolVariant
    beta: Number
    expected: tuple[Number, ...]

    def __getitem__(self, i: int) -> Number:
        return self.expected[i]

    def residuals(self) -> tuple[Number, ...]:
        a, b = hitting_system(self.variant, self.beta)
        x = self.expected
        return tuple(sum(row[j] * x[j] for j in range(len(x))) - b[i] for i, row in enumerate(a))


def hitting_system(variant: ProtocolVariant, beta: Number) -> tuple[Matrix, list[Number]]:
    """Linear system ``A x = 1`` for expected rounds until the next commit.

    From each state the next round goes to S0 (or S1 after an override) on
    an adversarial leader and one state up on an honest leader; an honest
    leader in the top state produces a commit.
    """
    b = Fraction(beta) if _is_exact(beta) else float(beta)
    t = transition_matrix(variant, b)
    n = len(t)
    # drop the honest self-loop of the top state: that transition is the commit
    t[n - 1][n - 1] = 0
    matrix = [[(1 if i == j else 0) - t[i][j] for j in range(n)] for i in range(n)]
    return matrix, [1] * n


def hitting_times(variant: ProtocolVariant, strategy: AttackStrategy, beta: Number) -> HittingTimes:
    if strategy not in DELAY_STRATEGIES or DELAY_FOR_VARIANT[variant] is not strategy:
        raise ValueError(f"hitting times are defined for delay attacks only, not {strategy.value}")
    if beta == 0:
        raise ZeroDivisionError("expected hitting times diverge at beta = 0")
    matrix, rhs = hitting_system(variant, beta)
    return HittingTimes(variant, beta, tuple(_solve(matrix, rhs, _is_exact(beta))))


def hitting_times_closed_form(variant: ProtocolVariant, beta: Number) -> tuple[Number, ...]:
    b = beta
    if variant is ProtocolVariant.HOTSTUFF:
        return (
            (2 * b**3 + b + 1) / b**4,
            (b**3 + b + 1) / b**4,
            (b**3 - b**2 + b + 1) / b**4,
            (b**3 - b**2 + 1) / b**4,
        )
    if variant is ProtocolVariant.LIBRABFT:
        return ((b**3 + b**2 + b + 1) / b**4, (b**2 + b + 1) / b**4, (b + 1) / b**4, 1 / b**4)
    return ((b**2 + b + 1) / b**3, (b + 1) / b**3, 1 / b**3)


def latency_by_composition(variant: ProtocolVariant, beta: Number) -> Number:
    """Average commit delay of kept honest blocks, built case by case.

    Each honest block is classified by the state it was proposed in. The
    block's survival probability and its delay follow from what the next
    one or two leaders do, after which the hitting time from the resulting
    state takes over.
    """
    strategy = DELAY_FOR_VARIANT[variant]
    b = Fraction(beta) if _is_exact(beta) else float(beta)
    a = 1 - b
    pi = markov_model(variant, strategy, b).stationary
    x = hitting_times(variant, strategy, b).expected

    if variant is ProtocolVariant.BROADCAST_QC:
        # no block is ever overridden; whatever follows, the delay averages to E[X1]
        return x[1]

    if variant is ProtocolVariant.HOTSTUFF:
        # proposed from S0: heads a fresh run
        fresh = [(pi[0] * b, x[1])]
        # proposed from S1: second of a run, never overridden
        second_delay = a * (x[0] + 1) + a * b * (x[1] + 2) + b * b * (x[3] + 2)
        second = [(pi[1] * b, second_delay)]
        # proposed from S2 or S3: third of a run, overridden by an adversarial successor
        third_mass = (pi[2] + pi[3]) * b
        third = [(third_mass * a * b, x[1] + 2), (third_mass * b * b, x[3] + 2)]
        parts = fresh + second + third
    else:
        # proposed from S0 or S1: kept whatever happens next
        early = [((pi[0] + pi[1]) * b, x[1])]
        late_mass = (pi[2] + pi[3]) * b
        # third of a run: its QC is hidden if the next leader is adversarial
        late = [(late_mass * a * b, x[0] + 2), (late_mass * b * b, x[3] + 2)]
        parts = early + late

    weight = sum(w for w, _ in parts)
    return sum(w * d for w, d in parts) / weight


def composition_matches_formula(variant: ProtocolVariant, beta: Number) -> Number:
    """Difference between the case composition and the closed form."""
    return latency_by_composition(variant, beta) - theory_latency(beta, variant, DELAY_FOR_VARIANT[variant])
