from __future__ import annotations

import numpy as np
import pytest

from cavity_qram import czfid, gue
from cavity_qram.noise import preset


@pytest.fixture(scope="session")
def ps2():
    return preset("PS2")


@pytest.fixture(scope="session")
def cz_channels():
    """Post-selected and raw CZ channels per preset, computed once."""
    cache = {}

    def get(name: str, raw: bool = False):
        key = (name, raw)
        if key not in cache:
            mm = czfid.MeasurementModel(1.0, 1.0, 1.0) if raw else None
            cache[key] = czfid.simulate_physical_cz_channel(preset(name), mm)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def transfer_channels():
    """Single-rail transfer channels keyed by (preset, global cutoff)."""
    cache = {}

    def get(name: str, cutoff: int = 2, params=None):
        key = (name, cutoff)
        if key not in cache:
            p = preset(name) if params is None else params
            chain = gue.GueChain.symmetric(p.gamma)
            cache[key] = gue.propagate_single_rail(chain, gue.PulsePair.from_params(p), p, global_cutoff=cutoff)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
