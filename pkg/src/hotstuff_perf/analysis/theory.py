"""Closed-form long-run metrics and the concentration bound.

Every function accepts ``beta`` as a ``Fraction`` (exact result) or a float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

from ..adversary import DELAY_FOR_VARIANT, AttackStrategy
from ..protocol import ProtocolVariant

Number = Union[Fraction, float]


class UnsupportedTheory(ValueError):
    """No closed form exists for this (variant, strategy, metric) combination."""


def _check_beta(beta: Number) -> None:
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")


def theory_growth(beta: Number, variant: ProtocolVariant, strategy: AttackStrategy) -> Number:
    _check_beta(beta)
    if strategy is AttackStrategy.NONE:
        return beta
    if strategy is AttackStrategy.FORKING:
        return beta**2 if variant is ProtocolVariant.BROADCAST_QC else beta**3
    raise UnsupportedTheory(f"no growth formula for {variant.value}/{strategy.value}")


def theory_quality(beta: Number, variant: ProtocolVariant, strategy: AttackStrategy) -> Number:
    _check_beta(beta)
    if strategy is AttackStrategy.NONE:
        # every round adds exactly one block, honest with probability beta
        return beta
    if strategy is AttackStrategy.FORKING:
        kept = beta**2 if variant is ProtocolVariant.BROADCAST_QC else beta**3
        return kept / (kept - beta + 1)
    raise UnsupportedTheory(f"no quality formula for {variant.value}/{strategy.value}")


def theory_latency(beta: Number, variant: ProtocolVariant, strategy: AttackStrategy) -> Number:
    _check_beta(beta)
    b = beta
    if strategy is AttackStrategy.NONE:
        return 2 if variant is ProtocolVariant.BROADCAST_QC else 3
    if strategy is not DELAY_FOR_VARIANT[variant]:
        raise UnsupportedTheory(f"no latency formula for {variant.value}/{strategy.value}")
    if variant is ProtocolVariant.HOTSTUFF:
        num = b**7 + 3 * b**6 - 4 * b**5 + 2 * b**4 + b**3 - 2 * b**2 + b + 1
        return num / (2 * b**7 - 2 * b**6 + b**4)
    if variant is ProtocolVariant.LIBRABFT:
        return (b**7 + b + 1) / (b**7 - b**6 + b**4)
    return (b + 1) / b**3


THEORY = {"growth": theory_growth, "quality": theory_quality, "latency": theory_latency}


def theory_value(metric: str, beta: Number, variant: ProtocolVariant, strategy: AttackStrategy) -> Number:
    return THEORY[metric](beta, variant, strategy)


def concentration_bound(beta: float, m: int, delta: float) -> tuple[float, float]:
    """Chernoff ceilings for the lower and upper tail of the count of honest triples.

    Returns ``(exp(-delta^2 beta^3 m / 6), exp(-delta^2 beta^3 m / 9))``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    core = delta * delta * float(beta) ** 3 * m
    return math.exp(-core / 6), math.exp(-core / 9)
