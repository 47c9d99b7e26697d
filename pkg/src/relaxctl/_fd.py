"""Central finite differences used as default derivatives and as gradient oracles."""
import numpy as np


def default_step(z):
    """Per-coordinate step ``1e-6 * (1 + |z|)``."""
    return 1e-6 * (1.0 + np.abs(np.asarray(z, dtype=float)))


def jacobian(fn, z, h=None):
    """Central-difference Jacobian of ``fn`` at ``z``; shape (m, len(z))."""
    z = np.asarray(z, dtype=float)
    steps = default_step(z) if h is None else np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    f0 = np.atleast_1d(np.asarray(fn(z), dtype=float))
    jac = np.empty((f0.size, z.size))
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = steps[i]
        fp = np.atleast_1d(np.asarray(fn(z + e), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(z - e), dtype=float))
        jac[:, i] = (fp - fm) / (2.0 * steps[i])
    return jac

