"""Shared fixtures and numeric helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from latpat.models import (
    Characteristic,
    HillParams,
    HillStage,
    LinearStage,
    cascade_model,
    notch_mimo_model,
)

# Frozen oracle constants (independent computations; see tests for the
# closed forms that reproduce them).
GOLDEN_FIXED_POINT = 0.6180339887498949          # (sqrt(5) - 1) / 2
CASCADE9_U_STAR = 1.9201751213471796             # real root of u^3 + u - 9
CASCADE9_GAIN = -1.5732944174784045              # T'(u*) for T = 9/(1+u^2)
ORBIT9_U1 = (9.0 - np.sqrt(77.0)) / 2.0          # roots of z^2 - 9 z + 1
ORBIT9_U2 = (9.0 + np.sqrt(77.0)) / 2.0
ORBIT9_PRODUCT = 4.0 / 81.0                      # T'(u1) T'(u2) = 4 / a^2

NOTCH_STEEP_U_STAR = np.array([7.223845717974932e-03, 9.857580715517237e+00])
NOTCH_STEEP_RHO = 3.8875141706495526
NOTCH_STEEP_ORBIT_U1 = np.array([7.266090028731130e-10, 2.0])
NOTCH_STEEP_ORBIT_U2 = np.array([2.0, 9.99999998546782])
NOTCH_STEEP_ORBIT_RHO = 0.64
NOTCH_STEEP_MODE_MAX_RE = 2.5118565362077128     # lambda = -1 block on cycle(4)


def pinned_cascade(amplitude: float = 9.0):
    """Two-state chain with T(u) = amplitude / (1 + u^2)."""
    return cascade_model(
        [1.0, 1.0],
        [HillParams(amplitude, 1.0, 2.0, "inhibiting"), LinearStage(1.0)],
    )


def canonical_notch():
    """Notch model from the worked steady-state example (all rates 1)."""
    return notch_mimo_model(1.0, 1.0, 1.0, HillParams(1.0, 1.0, 2.0, "inhibiting"))


def steep_notch():
    """Notch parameters in the unstable regime used for regressions."""
    return notch_mimo_model(10.0, 1.0, 2.0, HillParams(10.0, 0.05, 4.0, "inhibiting"))


@pytest.fixture
def cascade9():
    return pinned_cascade(9.0)


@pytest.fixture
def cascade9_char(cascade9):
    return Characteristic(cascade9)


@pytest.fixture
def notch():
    return canonical_notch()


@pytest.fixture
def notch_char(notch):
    return Characteristic(notch)


# -- numeric helpers ------------------------------------------------------------

def assert_eig_multisets_close(left, right, tol: float = 1e-6):
    """Greedy nearest matching of two complex eigenvalue multisets."""
    left = np.asarray(left, dtype=complex).ravel()
    right = list(np.asarray(right, dtype=complex).ravel())
    assert left.size == len(right), f"sizes differ: {left.size} vs {len(right)}"
    for val in left:
        dists = [abs(val - other) for other in right]
        best = int(np.argmin(dists))
        assert dists[best] <= tol, (
            f"eigenvalue {val} unmatched (nearest {right[best]}, "
            f"distance {dists[best]:.3e})")
        right.pop(best)


def random_hurwitz_monotone_system(rng: np.random.Generator, n: int, m: int):
    """Random (A, B, C) monotone for orthant cones with equal input/output
    orientation, A Hurwitz by diagonal dominance."""
    eps = rng.integers(0, 2, size=n)
    dlt = rng.integers(0, 2, size=m)
    sx = np.where(eps == 0, 1.0, -1.0)
    su = np.where(dlt == 0, 1.0, -1.0)
    a = rng.uniform(0.0, 1.0, size=(n, n)) * np.outer(sx, sx)
    np.fill_diagonal(a, 0.0)
    shift = np.abs(a).sum(axis=1) + rng.uniform(0.1, 2.0, size=n)
    a -= np.diag(shift)
    b = rng.uniform(0.0, 1.0, size=(n, m)) * np.outer(sx, su)
    c = rng.uniform(0.0, 1.0, size=(m, n)) * np.outer(su, sx)
    return a, b, c


def hill_value(a: float, big_k: float, p: float, direction: str, s):
    """Reference Hill evaluation used as an independent oracle."""
    s = np.maximum(np.asarray(s, dtype=float), 0.0)
    z = (s / big_k) ** p
    return a * z / (1.0 + z) if direction == "activating" else a / (1.0 + z)
