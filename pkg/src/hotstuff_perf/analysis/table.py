"""Theory table export."""

from __future__ import annotations

import csv
from fractions import Fraction
from typing import Iterable, TextIO

from ..adversary import DELAY_FOR_VARIANT, AttackStrategy
from ..protocol import ProtocolVariant
from .theory import THEORY, UnsupportedTheory

THEORY_COLUMNS = ("alpha", "beta", "variant", "strategy", "metric", "value")


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def theory_rows(alphas: Iterable[Fraction], variants: Iterable[ProtocolVariant]) -> list[dict]:
    """One row per supported (alpha, variant, strategy, metric) combination."""
    rows = []
    for alpha in alphas:
        beta = 1 - Fraction(alpha)
        for variant in variants:
            for strategy in (AttackStrategy.NONE, AttackStrategy.FORKING, DELAY_FOR_VARIANT[variant]):
                for metric, fn in THEORY.items():
                    try:
                        value = fn(beta, variant, strategy)
                    except UnsupportedTheory:
                        continue
                    rows.append(
                        {
                            "alpha": _fmt(alpha),
                            "beta": _fmt(beta),
                            "variant": variant.value,
                            "strategy": strategy.value,
                            "metric": metric,
                            "value": _fmt(value),
                        }
                    )
    return rows


def write_theory_csv(rows: list[dict], out: TextIO) -> None:
    writer = csv.DictWriter(out, fieldnames=THEORY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
