"""Block and block-tree structures shared by every protocol variant.

Blocks carry only what the round abstraction needs: the round, the parent
link, who proposed it and its certification status. Transactions and
signatures are not modelled.
"""

from __future__ import annotations

import enum
from typing import Iterable, Iterator, Optional, TextIO


class StructuralError(ValueError):
    """The tree would become malformed (unknown id, missing parent)."""


class ModelViolation(RuntimeError):
    """An operation broke an assumption of the round model."""


class ProposerKind(enum.Enum):
    GENESIS = "genesis"
    HONEST = "honest"
    ADVERSARIAL = "adversarial"
    NIL = "nil"


class Block:
    __slots__ = ("id", "round", "parent", "proposer", "certified", "qc_published")

    def __init__(
        self,
        id: int,
        round: int,
        parent: Optional[int],
        proposer: ProposerKind,
        certified: bool = False,
        qc_published: bool = False,
    ) -> None:
        if qc_published and not certified:
            raise ModelViolation("a QC can only be published for a certified block")
        self.id = id
        self.round = round
        self.parent = parent
        self.proposer = proposer
        self.certified = certified
        self.qc_published = qc_published

    def __repr__(self) -> str:
        flags = ("C" if self.certified else "-") + ("P" if self.qc_published else "-")
        return f"Block(id={self.id}, round={self.round}, parent={self.parent}, {self.proposer.value}, {flags})"


GENESIS_ID = 0


class BlockTree:
    """All blocks seen by the honest quorum, keyed by integer id.

    Ids are assigned densely in insertion order, so ``blocks[i].id == i``.
    ``newest_certified`` is the highest-round certified block whose QC is
    public; honest leaders extend it.
    """

    def __init__(self) -> None:
        genesis = Block(GENESIS_ID, 0, None, ProposerKind.GENESIS, True, True)
        self.blocks: list[Block] = [genesis]
        self.by_round: dict[int, int] = {0: GENESIS_ID}
        self.newest_certified: int = GENESIS_ID
        # newest adversarial block with a public QC, or None
        self.newest_adversarial: Optional[int] = None

    @property
    def genesis(self) -> int:
        return GENESIS_ID

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    def __getitem__(self, block_id: int) -> Block:
        try:
            if block_id < 0:
                raise IndexError
            return self.blocks[block_id]
        except (IndexError, TypeError):
            raise StructuralError(f"unknown block id {block_id!r}") from None

    def next_id(self) -> int:
        return len(self.blocks)

    def new_block(
        self,
        round: int,
        parent: int,
        proposer: ProposerKind,
        certified: bool = False,
        qc_published: bool = False,
    ) -> Block:
        block = Block(len(self.blocks), round, parent, proposer, certified, qc_published)
        self.insert(block)
        return block

    def insert(self, block: Block) -> None:
        if block.id != len(self.blocks):
            raise StructuralError(f"block id {block.id} out of sequence (expected {len(self.blocks)})")
        if block.parent is None or not 0 <= block.parent < len(self.blocks):
            raise StructuralError(f"parent {block.parent!r} of block {block.id} is not in the tree")
        parent = self.blocks[block.parent]
        if block.round <= parent.round:
            raise ModelViolation(f"block round {block.round} does not exceed parent round {parent.round}")
        if block.round in self.by_round:
            # one proposal per round reaches the honest quorum
            raise ModelViolation(f"round {block.round} already holds block {self.by_round[block.round]}")
        self.blocks.append(block)
        self.by_round[block.round] = block.id
        if block.qc_published:
            self._note_published(block)

    def certify(self, block_id: int, publish: bool = True) -> None:
        """Mark a block certified; certification is never revoked."""
        block = self.blocks[block_id]
        block.certified = True
        if publish and not block.qc_published:
            block.qc_published = True
            self._note_published(block)

    def _note_published(self, block: Block) -> None:
        if block.round > self.blocks[self.newest_certified].round:
            self.newest_certified = block.id
        if block.proposer is ProposerKind.ADVERSARIAL:
            if self.newest_adversarial is None or block.round > self.blocks[self.newest_adversarial].round:
                self.newest_adversarial = block.id

    def parent_of(self, block_id: int) -> Optional[Block]:
        parent = self[block_id].parent
        return None if parent is None else self.blocks[parent]

    def ancestors(self, block_id: int) -> Iterator[Block]:
        """Yield ``block_id`` and then every ancestor down to genesis.

        Terminates because ``insert`` only accepts children with a higher round.
        """
        blocks = self.blocks
        if not 0 <= block_id < len(blocks):
            raise StructuralError(f"unknown block id {block_id!r}")
        current: Optional[int] = block_id
        while current is not None:
            block = blocks[current]
            yield block
            current = block.parent

    def block_at_round(self, round: int) -> Optional[Block]:
        block_id = self.by_round.get(round)
        return None if block_id is None else self.blocks[block_id]

    def dump(self, out: TextIO) -> None:
        """Write one ``round,proposer,parent_round,certified,qc_published`` line per block."""
        for block in self.blocks:
            parent_round = "" if block.parent is None else str(self.blocks[block.parent].round)
            out.write(
                f"{block.round},{block.proposer.value},{parent_round},"
                f"{int(block.certified)},{int(block.qc_published)}\n"
            )


def insert_block(tree: BlockTree, block: Block) -> BlockTree:
    tree.insert(block)
    return tree


def is_ancestor(tree: BlockTree, a: int, b: int) -> bool:
    """True iff ``a`` lies on the parent path from ``b`` to genesis (reflexive)."""
    target = tree[a]
    for block in tree.ancestors(b):
        if block.id == target.id:
            return True
        if block.round < target.round:
            return False
    return False


def consecutive_suffix_len(
    tree: BlockTree,
    committed: Iterable[int] | frozenset[int] = frozenset(),
    tip: Optional[int] = None,
) -> int:
    """Length of the run of uncommitted, round-consecutive blocks ending at ``tip``.

    ``tip`` defaults to the newest certified block. Genesis always counts as
    a run member (it ends a run of length one) even though it is committed,
    which makes the initial chain state S1.
    """
    committed = committed if isinstance(committed, (set, frozenset)) else set(committed)
    blocks = tree.blocks
    block = tree[tree.newest_certified if tip is None else tip]
    if block.id in committed and block.id != GENESIS_ID:
        return 0
    length = 1
    while block.parent is not None:
        parent = blocks[block.parent]
        if parent.round + 1 != block.round:
            break
        if parent.id in committed and parent.id != GENESIS_ID:
            break
        length += 1
        block = parent
    return length
