"""Golden fixtures shared across the suite.

Channel parameters and budgets are recorded here as the reference instances;
budgets are sized so the shaped quantization noise stays well inside its
small-noise validity regime (max Sq/Sv ~ 1e-2).
"""

import numpy as np
import pytest

import qnshape as q

WIRELINE_BUDGET = 2.0e12
WIRELESS_BUDGET = 5.0e12

# delta-sigma end-to-end fixture: band 200 MHz, OSR 12 -> fs = 4.8 GHz;
# the budget puts the shaped target ~15 dB below the unshaped quantizer floor
DSM_BUDGET = 7.5e14
DSM_SAMPLE_RATE = 4.8e9


@pytest.fixture(scope="session")
def wireline_fixture():
    grid = q.make_grid(0.0, 1e8, 256)
    ch = q.wireline_channel(grid, signal_level_0=0.0, signal_slope=0.0,
                            noise_floor=-90.0, noise_tilt=50.0)
    return ch, q.PowerBudget(WIRELINE_BUDGET)


@pytest.fixture(scope="session")
def wireless_fixture():
    grid = q.make_grid(0.0, 2e8, 256)
    ch = q.wireless_channel(grid, num_notches=3, notch_depth=30.0,
                            noise_floor=-80.0, seed=20)
    return ch, q.PowerBudget(WIRELESS_BUDGET)


@pytest.fixture(scope="session")
def dsm_fixture():
    """Wireless-style shaped-noise channel plus modulator config for the
    order-4 / OSR-12 end-to-end runs."""
    grid = q.make_grid(0.0, 2e8, 64)
    ch = q.wireless_channel(grid, num_notches=1, notch_depth=12.0,
                            notch_width=0.3 * grid.width, noise_floor=-80.0,
                            seed=3)
    cfg = q.ModulatorConfig(order=4, osr=12.0, sample_rate=DSM_SAMPLE_RATE,
                            quantizer_levels=16, step=0.125,
                            max_ntf_gain=1.5, dither=True)
    return ch, q.PowerBudget(DSM_BUDGET), cfg


def random_smooth_psd(grid, rng, lo_db=-90.0, hi_db=-40.0):
    """Smooth strictly positive PSD: a few random low-order cosine modes in dB."""
    x = (grid.centers - grid.f_lo) / grid.width
    db = np.zeros(grid.num_bins)
    for m in range(1, 4):
        db += rng.uniform(-1.0, 1.0) * np.cos(np.pi * m * x)
    db = lo_db + (hi_db - lo_db) * (db - db.min()) / max(np.ptp(db), 1e-12)
    return q.Psd(grid, 10.0 ** (db / 10.0))
