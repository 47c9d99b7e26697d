import numpy as np
import pytest

from relaxctl import _kernels_py, kernels

cy = pytest.importorskip("relaxctl._kernels")


def _coeffs(rng, M, n):
    return [np.ascontiguousarray(rng.normal(size=(M, n, n)) * 0.3) for _ in range(3)]


def test_adjoint_sweep_backends_agree():
    rng = np.random.default_rng(0)
    M, n, d = 200, 3, 4
    left, mid, right = _coeffs(rng, M, n)
    steps = np.full(M, 1.0 / M)
    pt = rng.normal(size=(d, n))
    a = _kernels_py.adjoint_sweep(left, mid, right, steps, pt)
    b = cy.adjoint_sweep(left, mid, right, steps, pt)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_hamiltonian_argmax_backends_agree():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(50, 2))
    phi = rng.normal(size=(50, 301, 2))
    va, ia = _kernels_py.hamiltonian_argmax(p, phi)
    vb, ib = cy.hamiltonian_argmax(p, phi)
    assert np.array_equal(ia, ib) and np.allclose(va, vb, rtol=1e-14)


def test_argmax_first_of_ties():
    p = np.ones((1, 1))
    phi = np.array([[[1.0], [3.0], [3.0]]])
    for mod in (_kernels_py, cy):
        v, i = mod.hamiltonian_argmax(p, phi)
        assert i[0] == 1 and v[0] == 3.0


def test_backend_selection_flag():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_env(monkeypatch):
    import importlib

    monkeypatch.setenv("RELAXCTL_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("RELAXCTL_PURE_PYTHON")
        importlib.reload(kernels)
