"""Backend agreement: the numba kernels and the numpy fallbacks must match."""

import numpy as np
import pytest

from pixelaoa import kernels
from pixelaoa.crlb import fd_stencil
from pixelaoa.grid import AngleGrid


def _random_pattern(rng, n_ports, grid):
    shape = (2 * n_ports, grid.n_theta, grid.n_phi)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_fim_sweep_backends_agree():
    rng = np.random.default_rng(42)
    grid = AngleGrid(step_deg=5.0)
    e = _random_pattern(rng, 3, grid)
    t_ids = np.arange(0, grid.n_theta, 3)
    p_ids = np.arange(0, grid.n_phi, 5)
    it = np.repeat(t_ids, p_ids.size)
    ip = np.tile(p_ids, t_ids.size)
    sten = fd_stencil(grid, it, ip, 1)
    a = kernels._fim_sweep_numpy(e, it, ip, *sten, 1.0)
    if kernels.backend_name() == "numba":
        b = kernels._fim_sweep_numba(np.ascontiguousarray(e), it, ip,
                                     *[np.ascontiguousarray(x) for x in sten[:2]],
                                     np.ascontiguousarray(sten[2]),
                                     *[np.ascontiguousarray(x) for x in sten[3:5]],
                                     np.ascontiguousarray(sten[5]), 1.0)
    else:
        pytest.skip("numba backend not active")
    for x, y in zip(a, b):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        finite = np.isfinite(x)
        assert np.array_equal(finite, np.isfinite(y))
        assert np.allclose(x[finite], y[finite], rtol=1e-12, atol=1e-14)


def test_ml_scores_backends_agree():
    rng = np.random.default_rng(3)
    G, N = 50, 6
    basis = np.zeros((G, N, 2), dtype=np.complex128)
    rank = rng.integers(0, 3, size=G)
    for g in range(G):
        cols = rng.normal(size=(N, 2)) + 1j * rng.normal(size=(N, 2))
        q, _ = np.linalg.qr(cols)
        if rank[g] >= 1:
            basis[g, :, 0] = q[:, 0]
        if rank[g] == 2:
            basis[g, :, 1] = q[:, 1]
    y = rng.normal(size=N) + 1j * rng.normal(size=N)
    a = kernels._ml_scores_numpy(basis, rank, y)
    if kernels.backend_name() != "numba":
        pytest.skip("numba backend not active")
    b = kernels._ml_scores_numba(basis, rank.astype(np.int64), y)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    assert np.all(a[rank == 0] == -1.0)
