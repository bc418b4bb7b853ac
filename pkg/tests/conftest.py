"""Shared oracles kept independent of the implementation paths they check."""
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def mat_exp_series(m, terms=30):
    """Truncated matrix power-series exponential (oracle for exp maps)."""
    out = np.eye(m.shape[-1])
    term = np.eye(m.shape[-1])
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def fd_directional(f, y, v, eps):
    """Central finite difference of f along direction v."""
    return (f(y + eps * v) - f(y - eps * v)) / (2.0 * eps)


def fine_grid_levy(rng, h, n_paths, substeps):
    """Euler-sum estimates of (dW, J12 - J21, I) on a refined grid.

    The area sum uses path values at substep starts; the midpoint
    corrections cancel in the antisymmetric combination.  I is the exact
    time integral of the piecewise-linear interpolant.
    """
    dw = rng.normal(0.0, np.sqrt(h / substeps), size=(n_paths, substeps, 2))
    w_start = np.cumsum(dw, axis=1) - dw
    area = np.sum(w_start[:, :, 0] * dw[:, :, 1] - w_start[:, :, 1] * dw[:, :, 0], axis=1)
    dt = h / substeps
    time_area = np.sum((w_start + 0.5 * dw) * dt, axis=1)
    return dw.sum(axis=1), area, time_area
