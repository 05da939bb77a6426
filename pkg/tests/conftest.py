"""Shared fixture builders for the test suite."""

import math

import numpy as np
import pytest

from kslab.integrals import Box, IntegralTable, ZEntry, build_table
from kslab.partition import assemble
from kslab.potentials import PairPotential
from kslab.slog import SLog


def make_tonks(L, M=None, a=1.0):
    """Hard rods on a segment, exact table, default truncation past packing."""
    p = PairPotential.hardcore(a)
    if M is None:
        M = int(math.floor(L / a)) + 1
    return assemble(build_table(p, Box((float(L),)), M))


def make_ideal(V=1.0, M=8):
    p = PairPotential.ideal(dimension=1)
    return assemble(build_table(p, Box((float(V),)), M))


def poly_from_coeffs(c, scale=None):
    """Partition polynomial with prescribed coefficients c_0..c_M.

    Entries are tagged synthetic so the exact-coefficient rebuild stays
    off and the plain float64 pipeline is what gets exercised.
    """
    c = np.asarray(c, dtype=float)
    p = PairPotential.hardcore(1.0)
    box = Box((float(len(c)),))
    entries = [
        ZEntry(m, SLog.from_value(c[m] * math.factorial(m)), 0.0, "synthetic")
        for m in range(len(c))
    ]
    table = IntegralTable(p, box, len(c) - 1, entries)
    return assemble(table, scale=scale)


def rel_err(x, y):
    return abs(x - y) / max(abs(x), abs(y), 1e-300)


@pytest.fixture(scope="session")
def tonks5():
    return make_tonks(5.0)
