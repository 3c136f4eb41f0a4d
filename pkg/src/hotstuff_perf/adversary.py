"""Attack strategies: map the public chain state to the adversarial leader's move.

The adversary is rushing: it sees the whole block tree and the honest
``locked_round`` before it acts.
"""

from __future__ import annotations

import enum
from typing import Iterable, Optional

from .core import BlockTree, ModelViolation, consecutive_suffix_len
from .protocol import (
    PROPOSE_NOTHING,
    ActionKind,
    AdversaryAction,
    OutcomeKind,
    ProtocolVariant,
    RoundOutcome,
)


class ConfigurationError(ValueError):
    """Strategy and protocol variant do not belong together."""


class AttackStrategy(enum.Enum):
    NONE = "none"
    SILENT = "silent"
    FORKING = "forking"
    DELAY_HOTSTUFF = "delay-hotstuff"
    DELAY_LIBRA = "delay-libra"
    DELAY_BROADCAST_QC = "delay-broadcast-qc"


DELAY_FOR_VARIANT = {
    ProtocolVariant.HOTSTUFF: AttackStrategy.DELAY_HOTSTUFF,
    ProtocolVariant.LIBRABFT: AttackStrategy.DELAY_LIBRA,
    ProtocolVariant.BROADCAST_QC: AttackStrategy.DELAY_BROADCAST_QC,
}
DELAY_STRATEGIES = frozenset(DELAY_FOR_VARIANT.values())


def check_pairing(variant: ProtocolVariant, strategy: AttackStrategy) -> None:
    if strategy in DELAY_STRATEGIES and DELAY_FOR_VARIANT[variant] is not strategy:
        raise ConfigurationError(f"{strategy.value} cannot be run against {variant.value}")


class ChainStateClass(enum.IntEnum):
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3


def classify_state(
    last_outcome: Optional[RoundOutcome],
    tree: BlockTree,
    committed: Iterable[int] = frozenset(),
    tip: Optional[int] = None,
) -> ChainStateClass:
    """S0 after a round that produced nothing usable, else S_min(run, 3).

    ``last_outcome`` of ``None`` means no round has run yet; the genesis
    block then forms a run of one. Under LibraBFT pass the pending proposal
    as ``tip`` so it counts towards the run.
    """
    if last_outcome is not None and last_outcome.kind in (OutcomeKind.TIMEOUT, OutcomeKind.UNCERTIFIED_BLOCK):
        return ChainStateClass.S0
    return ChainStateClass(min(consecutive_suffix_len(tree, committed, tip), 3))


def forking_action(tree: BlockTree, honest_locked_round: int) -> AdversaryAction:
    """Extend the newest adversarial certified block at or above the lock, else the locked block."""
    adversarial = tree.newest_adversarial
    if adversarial is not None and tree.blocks[adversarial].round >= honest_locked_round:
        return AdversaryAction.extend(adversarial)
    locked = tree.block_at_round(honest_locked_round)
    if locked is None or not locked.qc_published:
        raise ModelViolation(f"no certified block at locked round {honest_locked_round}")
    return AdversaryAction.extend(locked.id)


def delay_action(strategy: AttackStrategy, state: ChainStateClass, tree: BlockTree) -> AdversaryAction:
    if strategy is AttackStrategy.DELAY_HOTSTUFF:
        if state is ChainStateClass.S3:
            newest = tree.blocks[tree.newest_certified]
            return AdversaryAction.extend(newest.parent)
        return PROPOSE_NOTHING
    if strategy is AttackStrategy.DELAY_LIBRA:
        # the pending proposal's QC is hidden only when it would complete a run of three
        return AdversaryAction(ActionKind.VOTE_SPLIT, withhold=state is ChainStateClass.S3)
    if strategy is AttackStrategy.DELAY_BROADCAST_QC:
        return PROPOSE_NOTHING
    raise ConfigurationError(f"{strategy.value} is not a delay strategy")
