"""Honest replica rules for pipelined HotStuff, LibraBFT and broadcast-QC HotStuff.

Rounds are synchronous, so every honest node ends a round with the same
view. The simulator therefore keeps a single :class:`ReplicaView` for the
whole honest quorum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .core import GENESIS_ID, Block, BlockTree, ModelViolation, ProposerKind


class ProtocolVariant(enum.Enum):
    HOTSTUFF = "hotstuff"
    LIBRABFT = "librabft"
    BROADCAST_QC = "broadcast-qc"


class OutcomeKind(enum.Enum):
    CERTIFIED_BLOCK = "certified"
    TIMEOUT = "timeout"
    CERTIFIED_NIL = "nil"
    UNCERTIFIED_BLOCK = "uncertified"
    # LibraBFT only: voted proposal whose QC is assembled by the next leader
    PENDING_QC = "pending"


class RoundOutcome(NamedTuple):
    round: int
    kind: OutcomeKind
    block: Optional[int] = None


class ActionKind(enum.Enum):
    EXTEND = "extend"
    PROPOSE_NOTHING = "nothing"
    VOTE_SPLIT = "vote-split"


class AdversaryAction(NamedTuple):
    """What the round's leader does.

    ``withhold`` only matters under LibraBFT: the leader keeps the QC of the
    previous round's proposal to itself, so that block is never certified.
    """

    kind: ActionKind
    target: Optional[int] = None
    withhold: bool = False

    @classmethod
    def extend(cls, target: int) -> "AdversaryAction":
        return cls(ActionKind.EXTEND, target)


PROPOSE_NOTHING = AdversaryAction(ActionKind.PROPOSE_NOTHING)


@dataclass
class ReplicaView:
    last_voted_round: int = 0
    locked_round: int = 0
    newest_certified: int = GENESIS_ID
    committed: set[int] = field(default_factory=lambda: {GENESIS_ID})
    commit_log: list[tuple[int, int]] = field(default_factory=list)


def voting_decision(view: ReplicaView, block: Block, tree: BlockTree) -> bool:
    parent = tree.blocks[block.parent]
    return block.round > view.last_voted_round and parent.round >= view.locked_round


def apply_vote(view: ReplicaView, block: Block, tree: BlockTree) -> ReplicaView:
    blocks = tree.blocks
    view.last_voted_round = block.round
    parent = blocks[block.parent]
    if parent.parent is not None:
        grandparent_round = blocks[parent.parent].round
        if grandparent_round > view.locked_round:
            view.locked_round = grandparent_round
    if parent.qc_published and parent.round > tree.blocks[view.newest_certified].round:
        view.newest_certified = parent.id
    return view


def update_lock_on_qc(
    view: ReplicaView, certified_block: Block, tree: BlockTree, variant: ProtocolVariant
) -> ReplicaView:
    """Broadcast-QC only: a received QC locks on the certified block's parent."""
    if variant is not ProtocolVariant.BROADCAST_QC or certified_block.parent is None:
        return view
    parent_round = tree.blocks[certified_block.parent].round
    if parent_round > view.locked_round:
        view.locked_round = parent_round
    return view


def honest_proposal(view: ReplicaView, tree: BlockTree) -> AdversaryAction:
    """The honest leader extends the newest certified block with a direct child."""
    return AdversaryAction.extend(tree.newest_certified)


def _commit(view: ReplicaView, tree: BlockTree, head: Block, commit_round: int) -> list[tuple[int, int]]:
    newly: list[tuple[int, int]] = []
    for block in tree.ancestors(head.id):
        if block.id in view.committed:
            break
        newly.append((block.id, commit_round))
    newly.reverse()
    for block_id, _ in newly:
        view.committed.add(block_id)
    view.commit_log.extend(newly)
    return newly


def detect_commits(
    view: ReplicaView,
    tree: BlockTree,
    variant: ProtocolVariant,
    current_round: int,
    trigger: Optional[int] = None,
) -> list[tuple[int, int]]:
    """Apply the 3-direct-chain commit rule after ``trigger`` arrived.

    For HotStuff and LibraBFT ``trigger`` is a freshly voted proposal that
    carries its parent's QC; the triple must end at that parent. For
    broadcast-QC ``trigger`` is the block whose QC was just broadcast and
    the triple ends at it. Returns the newly committed ``(id, round)`` pairs.
    """
    if trigger is None:
        return []
    blocks = tree.blocks
    b3 = blocks[trigger]
    if variant is not ProtocolVariant.BROADCAST_QC:
        if b3.parent is None:
            return []
        b3 = blocks[b3.parent]
    if b3.parent is None:
        return []
    b2 = blocks[b3.parent]
    if b2.parent is None or b2.round + 1 != b3.round:
        return []
    b1 = blocks[b2.parent]
    if b1.round + 1 != b2.round or b1.id in view.committed:
        return []
    if not (b1.certified and b2.certified and b3.certified):
        raise ModelViolation(f"commit triple ending at round {b3.round} is not fully certified")
    return _commit(view, tree, b1, current_round)


def certify_round(
    variant: ProtocolVariant,
    leader_kind: ProposerKind,
    action: AdversaryAction,
    tree: BlockTree,
    view: ReplicaView,
    round: int,
    pending: Optional[int] = None,
) -> tuple[RoundOutcome, Optional[RoundOutcome], Optional[int], list[tuple[int, int]]]:
    """Execute one round: fate of the pending QC, the proposal, voting and commits.

    Returns ``(outcome, settled_previous, pending, commits)``. Under LibraBFT
    the previous round's proposal only becomes certified (or is lost) in this
    round; ``settled_previous`` reports that final outcome. ``pending`` is the
    proposal still waiting for its QC after this round (LibraBFT only).
    """
    libra = variant is ProtocolVariant.LIBRABFT
    settled: Optional[RoundOutcome] = None
    if pending is not None:
        previous = tree.blocks[pending]
        if action.withhold:
            settled = RoundOutcome(previous.round, OutcomeKind.UNCERTIFIED_BLOCK, pending)
        else:
            tree.certify(pending)
            view.newest_certified = tree.newest_certified
            settled = RoundOutcome(previous.round, OutcomeKind.CERTIFIED_BLOCK, pending)
        pending = None

    commits: list[tuple[int, int]] = []
    if action.kind is ActionKind.EXTEND:
        parent = tree.blocks[action.target]
        if not (parent.certified and parent.qc_published):
            raise ModelViolation(f"proposal at round {round} extends a block without a public QC")
        block = tree.new_block(round, parent.id, leader_kind)
        if not voting_decision(view, block, tree):
            # honest nodes refuse it; the round times out
            return RoundOutcome(round, OutcomeKind.TIMEOUT), settled, None, commits
        apply_vote(view, block, tree)
        if variant is not ProtocolVariant.BROADCAST_QC:
            commits = detect_commits(view, tree, variant, round, block.id)
        if libra:
            return RoundOutcome(round, OutcomeKind.PENDING_QC, block.id), settled, block.id, commits
        tree.certify(block.id)
        view.newest_certified = tree.newest_certified
        if variant is ProtocolVariant.BROADCAST_QC:
            update_lock_on_qc(view, block, tree, variant)
            commits = detect_commits(view, tree, variant, round, block.id)
        return RoundOutcome(round, OutcomeKind.CERTIFIED_BLOCK, block.id), settled, None, commits

    if action.kind is ActionKind.PROPOSE_NOTHING and libra:
        nil = tree.new_block(round, tree.newest_certified, ProposerKind.NIL)
        apply_vote(view, nil, tree)
        # the Nil block carries its parent's QC, so it can complete a commit triple
        commits = detect_commits(view, tree, variant, round, nil.id)
        tree.certify(nil.id)
        view.newest_certified = tree.newest_certified
        return RoundOutcome(round, OutcomeKind.CERTIFIED_NIL, nil.id), settled, None, commits

    # silent leader (HotStuff variants) or split vote (LibraBFT)
    return RoundOutcome(round, OutcomeKind.TIMEOUT), settled, None, commits
