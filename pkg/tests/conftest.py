from fractions import Fraction

import pytest

from hotstuff_perf.adversary import AttackStrategy
from hotstuff_perf.core import GENESIS_ID, BlockTree, ProposerKind
from hotstuff_perf.protocol import ProtocolVariant
from hotstuff_perf.simulator import SimConfig, aggregate, leader_sequence, simulate_run


def build_chain(tree, rounds, parent=GENESIS_ID, proposer=ProposerKind.HONEST, certified=True):
    """Append one block per round in ``rounds``, each extending the previous; return the ids."""
    ids = []
    for r in rounds:
        block = tree.new_block(r, parent, proposer, certified=certified, qc_published=certified)
        ids.append(block.id)
        parent = block.id
    return ids


@pytest.fixture
def tree():
    return BlockTree()


class RunCache:
    """Simulation batches shared across test modules, keyed by their parameters."""

    def __init__(self):
        self._store = {}

    def batch(self, n, f, variant, strategy, rounds, runs, seed=1):
        key = (n, f, variant, strategy, rounds, runs, seed)
        if key not in self._store:
            config = SimConfig(n, f, variant, strategy, rounds, seed, runs, allow_boundary=True).validate()
            reports = [
                simulate_run(config, leader_sequence(seed + i, rounds, float(config.alpha))).report
                for i in range(runs)
            ]
            self._store[key] = (reports, aggregate(reports, config))
        return self._store[key]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


TWO_THIRDS = Fraction(2, 3)
V = ProtocolVariant
S = AttackStrategy


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
