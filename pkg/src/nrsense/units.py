"""Physical constants and dB helpers."""

from __future__ import annotations

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
T0_KELVIN = 290.0


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm2watt(p_dbm):
    """dBm -> W. ``-inf`` maps to exactly zero."""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt2dbm(p_w):
    return lin2db(p_w) + 30.0
