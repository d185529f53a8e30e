"""Shared fixtures.

The full-resolution profile table is expensive enough (160001 nodes, two
sparse solves) that it is built once per session and shared; tests that
need a quick disposable table build their own small one.
"""

import numpy as np
import pytest

from gtlab.potential import DoubleWell, first_order_correction, optimal_profile


@pytest.fixture(scope="session")
def well():
    return DoubleWell()


@pytest.fixture(scope="session")
def profile_table(well):
    table = optimal_profile(well)
    return first_order_correction(table, well)


def small_table(well, half_width=8.0, spacing=2e-3, with_phi1=True):
    table = optimal_profile(well, half_width=half_width, spacing=spacing)
    if with_phi1:
        first_order_correction(table, well)
    return table


@pytest.fixture(scope="session")
def coarse_table(well):
    return small_table(well)
