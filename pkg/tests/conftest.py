from pathlib import Path

import pytest

from ponshare import PonGraph
from ponshare.topology import NodeKind as K

DATA_DIR = Path(__file__).parent / "data"
RELAY_CHAIN_FILE = DATA_DIR / "relay_chain.pon"


def build_relay_chain(active_first: bool = True) -> PonGraph:
    """Three splitters in a chain; only the first may be active.

    Topology: OLT(0) - RN1(1) - RN2(2) - RN3(3), with an IC ONU (4)
    under RN2 and a plain ONU (5) under RN3. With the first splitter
    active, serving ONU 5 from ONU 4 takes the 5-hop climb-and-return
    through RN1; with it passive there is no valid path at all.
    """
    return PonGraph.from_nodes_edges(
        nodes=[
            (0, K.OLT),
            (1, K.ACTIVE_RN if active_first else K.PASSIVE_RN),
            (2, K.PASSIVE_RN),
            (3, K.PASSIVE_RN),
            (4, K.IC_ONU),
            (5, K.ONU),
        ],
        edges=[(0, 1), (1, 2), (2, 3), (2, 4), (3, 5)],
    )


def build_toy3() -> PonGraph:
    """One active splitter fanning out to an IC ONU and two plain ONUs."""
    return PonGraph.from_nodes_edges(
        nodes=[(0, K.OLT), (1, K.ACTIVE_RN), (2, K.IC_ONU), (3, K.ONU), (4, K.ONU)],
        edges=[(0, 1), (1, 2), (1, 3), (1, 4)],
    )


@pytest.fixture
def relay_chain() -> PonGraph:
    return build_relay_chain()


@pytest.fixture
def relay_chain_passive() -> PonGraph:
    return build_relay_chain(active_first=False)


@pytest.fixture
def toy3() -> PonGraph:
    return build_toy3()
