import pytest

from hotstuff_perf.adversary import AttackStrategy
from hotstuff_perf.core import GENESIS_ID, ModelViolation, ProposerKind
from hotstuff_perf.protocol import (
    PROPOSE_NOTHING,
    ActionKind,
    AdversaryAction,
    OutcomeKind,
    ProtocolVariant,
    ReplicaView,
    apply_vote,
    certify_round,
    detect_commits,
    honest_proposal,
    update_lock_on_qc,
    voting_decision,
)
from hotstuff_perf.simulator import SimConfig, simulate_run

from conftest import build_chain


def _block_with_parent_round(tree, parent_round, round):
    ids = build_chain(tree, [parent_round])
    return tree.new_block(round, ids[-1], ProposerKind.HONEST)


@pytest.mark.parametrize(
    "parent_round, round, last_voted, locked, expected",
    [(4, 5, 4, 3, True), (2, 5, 4, 3, False), (3, 4, 4, 0, False)],
)
def test_voting_rule(tree, parent_round, round, last_voted, locked, expected):
    block = _block_with_parent_round(tree, parent_round, round)
    view = ReplicaView(last_voted_round=last_voted, locked_round=locked)
    assert voting_decision(view, block, tree) is expected


def test_vote_locks_on_grandparent(tree):
    k = 3
    ids = build_chain(tree, [k, k + 1, k + 2])
    view = ReplicaView(last_voted_round=k + 1, locked_round=k - 1)
    apply_vote(view, tree[ids[-1]], tree)
    assert view.locked_round == k
    assert view.last_voted_round == k + 2


def test_vote_after_gap_locks_on_middle_block(tree):
    k = 3
    ids = build_chain(tree, [k, k + 1, k + 2])
    view = ReplicaView(last_voted_round=k + 2, locked_round=k)
    b4 = tree.new_block(k + 4, ids[-1], ProposerKind.HONEST)
    apply_vote(view, b4, tree)
    assert (view.last_voted_round, view.locked_round) == (k + 4, k + 1)


def test_vote_on_genesis_child_keeps_lock(tree):
    b1 = tree.new_block(1, GENESIS_ID, ProposerKind.HONEST)
    view = ReplicaView()
    apply_vote(view, b1, tree)
    assert view.locked_round == 0 and view.last_voted_round == 1


def test_qc_lock_moves_to_parent_under_broadcast_qc(tree):
    k = 4
    ids = build_chain(tree, [k, k + 1, k + 2])
    view = ReplicaView(locked_round=k)
    update_lock_on_qc(view, tree[ids[-1]], tree, ProtocolVariant.BROADCAST_QC)
    assert view.locked_round == k + 1


def test_qc_lock_for_genesis_child(tree):
    (b1,) = build_chain(tree, [1])
    view = ReplicaView()
    update_lock_on_qc(view, tree[b1], tree, ProtocolVariant.BROADCAST_QC)
    assert view.locked_round == 0


def test_qc_lock_is_noop_for_pipelined(tree):
    ids = build_chain(tree, [4, 5, 6])
    view = ReplicaView(locked_round=4)
    update_lock_on_qc(view, tree[ids[-1]], tree, ProtocolVariant.HOTSTUFF)
    assert view.locked_round == 4


def test_honest_leader_extends_newest_certified(tree):
    ids = build_chain(tree, [4])
    view = ReplicaView()
    action = honest_proposal(view, tree)
    assert action == AdversaryAction.extend(ids[-1])
    # a timeout in round 5 does not change the target of round 6
    outcome, _, _, _ = certify_round(ProtocolVariant.HOTSTUFF, ProposerKind.HONEST, action, tree, view, 6)
    assert outcome.kind is OutcomeKind.CERTIFIED_BLOCK
    assert tree[outcome.block].parent == ids[-1]


def test_honest_leader_extends_nil_block(tree):
    view = ReplicaView()
    outcome, _, _, _ = certify_round(
        ProtocolVariant.LIBRABFT, ProposerKind.ADVERSARIAL, PROPOSE_NOTHING, tree, view, 1
    )
    assert outcome.kind is OutcomeKind.CERTIFIED_NIL
    assert tree[outcome.block].proposer is ProposerKind.NIL
    assert honest_proposal(view, tree).target == outcome.block


def test_honest_round_under_hotstuff_certifies(tree):
    view = ReplicaView()
    outcome, _, pending, _ = certify_round(
        ProtocolVariant.HOTSTUFF, ProposerKind.HONEST, honest_proposal(view, tree), tree, view, 1
    )
    assert outcome.kind is OutcomeKind.CERTIFIED_BLOCK and pending is None


def test_libra_vote_split_is_timeout(tree):
    view = ReplicaView()
    outcome, _, _, _ = certify_round(
        ProtocolVariant.LIBRABFT, ProposerKind.ADVERSARIAL, AdversaryAction(ActionKind.VOTE_SPLIT), tree, view, 1
    )
    assert outcome.kind is OutcomeKind.TIMEOUT


def test_libra_withheld_qc_leaves_block_uncertified(tree):
    view = ReplicaView()
    variant = ProtocolVariant.LIBRABFT
    outcome, _, pending, _ = certify_round(
        variant, ProposerKind.HONEST, honest_proposal(view, tree), tree, view, 1
    )
    assert outcome.kind is OutcomeKind.PENDING_QC and pending == outcome.block
    withhold = AdversaryAction(ActionKind.VOTE_SPLIT, withhold=True)
    outcome2, settled, pending2, _ = certify_round(variant, ProposerKind.ADVERSARIAL, withhold, tree, view, 2, pending)
    assert settled.kind is OutcomeKind.UNCERTIFIED_BLOCK and settled.round == 1
    assert outcome2.kind is OutcomeKind.TIMEOUT and pending2 is None
    assert not tree[pending].certified
    assert tree.newest_certified == GENESIS_ID


def test_extending_block_without_public_qc_is_rejected(tree):
    hidden = tree.new_block(1, GENESIS_ID, ProposerKind.HONEST)
    view = ReplicaView()
    with pytest.raises(ModelViolation):
        certify_round(ProtocolVariant.HOTSTUFF, ProposerKind.HONEST, AdversaryAction.extend(hidden.id), tree, view, 2)


def _run(variant, leaders, strategy=AttackStrategy.NONE):
    config = SimConfig(4, 1, variant, strategy, len(leaders), unsafe=True)
    return simulate_run(config, leaders, trace=True)


@pytest.mark.parametrize("variant, delay", [(ProtocolVariant.HOTSTUFF, 3), (ProtocolVariant.LIBRABFT, 3),
                                            (ProtocolVariant.BROADCAST_QC, 2)])
def test_all_honest_commit_delay(variant, delay):
    result = _run(variant, [True] * 30)
    log = result.view.commit_log
    assert log
    for block_id, commit_round in log:
        assert commit_round - result.tree[block_id].round == delay


def test_libra_nil_block_counts_in_triple():
    # honest at 1 and 2, silent leader at 3 (Nil), honest at 4
    result = _run(ProtocolVariant.LIBRABFT, [True, True, False, True], AttackStrategy.SILENT)
    b1 = result.tree.block_at_round(1).id
    assert (b1, 4) in result.view.commit_log
    assert result.tree.block_at_round(3).proposer is ProposerKind.NIL


def test_detect_commits_needs_consecutive_rounds(tree):
    ids = build_chain(tree, [1, 2, 4])
    view = ReplicaView()
    b5 = tree.new_block(5, ids[-1], ProposerKind.HONEST)
    assert detect_commits(view, tree, ProtocolVariant.HOTSTUFF, 5, b5.id) == []


def test_detect_commits_commits_whole_prefix(tree):
    ids = build_chain(tree, [1, 3, 4, 5])
    view = ReplicaView()
    b6 = tree.new_block(6, ids[-1], ProposerKind.HONEST)
    commits = detect_commits(view, tree, ProtocolVariant.HOTSTUFF, 6, b6.id)
    assert [tree[b].round for b, _ in commits] == [1, 3]
    assert all(r == 6 for _, r in commits)


def test_broadcast_qc_commit_ends_at_certified_block(tree):
    ids = build_chain(tree, [1, 2, 3])
    view = ReplicaView()
    commits = detect_commits(view, tree, ProtocolVariant.BROADCAST_QC, 3, ids[-1])
    assert [tree[b].round for b, _ in commits] == [1]
