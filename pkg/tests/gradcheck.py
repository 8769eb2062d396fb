"""Central finite-difference gradient oracle, independent of the tape.

``build_loss`` must construct a fresh scalar-valued graph from the given
parameter tensors on every call; the oracle perturbs parameter entries in
place and compares the numerical slope against the recorded gradient.
Checks are meant to run on float64 parameters (step 1e-3 leaves ~1e-7
truncation error there).
"""

from contextlib import contextmanager

import numpy as np

from typoguard import nn


def max_relative_error(build_loss, params, step=1e-3):
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = float(build_loss().data)
            flat[i] = saved - step
            down = float(build_loss().data)
            flat[i] = saved
            numeric = (up - down) / (2.0 * step)
            rel = abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, rel)
    for p in params:
        p.grad = None
    return worst


def assert_gradients_match(build_loss, params, tol=1e-4, step=1e-3):
    err = max_relative_error(build_loss, params, step)
    assert err < tol, f"max relative gradient error {err:.3e} >= {tol}"


@contextmanager
def float64_params():
    """Make fresh parameters 64-bit so finite differences are meaningful."""
    saved = nn.DEFAULT_DTYPE
    nn.DEFAULT_DTYPE = np.float64
    try:
        yield
    finally:
        nn.DEFAULT_DTYPE = saved
