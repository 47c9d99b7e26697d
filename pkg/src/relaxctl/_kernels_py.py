"""Pure-Python (numpy) reference implementations of the numeric kernels.

These are the fallback used when the compiled ``_kernels`` extension is not
available, and the reference the compiled versions are benchmarked against.
"""
import numpy as np


def adjoint_sweep(a_left, a_mid, a_right, steps, p_terminal):
    """Backward RK4 for row covectors obeying ``p' = -p A(t)``.

    Parameters
    ----------
    a_left, a_mid, a_right : ndarray, shape (M, n, n)
        Coefficient matrix of step ``j`` at ``t_j``, ``t_j + h_j/2`` and
        ``t_{j+1}``.
    steps : ndarray, shape (M,)
        Step lengths ``h_j``.
    p_terminal : ndarray, shape (d, n)
        A batch of ``d`` terminal covectors ``p(t_M)``.

    Returns
    -------
    ndarray, shape (M + 1, d, n)
    """
    a_left = np.asarray(a_left, dtype=float)
    a_mid = np.asarray(a_mid, dtype=float)
    a_right = np.asarray(a_right, dtype=float)
    steps = np.asarray(steps, dtype=float)
    p = np.array(p_terminal, dtype=float, ndmin=2)
    m = steps.shape[0]
    out = np.empty((m + 1,) + p.shape)
    out[m] = p
    for j in range(m - 1, -1, -1):
        h = steps[j]
        # reversed time: dp/ds = p A
        k1 = p @ a_right[j]
        k2 = (p + 0.5 * h * k1) @ a_mid[j]
        k3 = (p + 0.5 * h * k2) @ a_mid[j]
        k4 = (p + h * k3) @ a_left[j]
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[j] = p
    return out


def hamiltonian_argmax(p, phi):
    """Row-wise maximum of ``<p_b, phi_{b,g}>`` over the sample axis ``g``.

    Parameters
    ----------
    p : ndarray, shape (B, n)
    phi : ndarray, shape (B, G, n)

    Returns
    -------
    values : ndarray, shape (B,)
    index : ndarray of intp, shape (B,)
    """
    p = np.asarray(p, dtype=float)
    phi = np.asarray(phi, dtype=float)
    h = np.einsum("bgn,bn->bg", phi, p)
    idx = np.argmax(h, axis=1)
    return h[np.arange(h.shape[0]), idx], idx
