"""Shared test utilities: the finite-difference gradient oracle."""
import numpy as np

from contrastner import autodiff as ad


def rel_err(a, b, floor=1e-3):
    """Worst-case relative error with a small absolute floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def fd_gradients(build, tensors, eps=1e-5, max_coords=None, rng=None):
    """Central finite differences of build() w.r.t. each tensor's entries.

    build must reconstruct the computation from the tensors' current
    .values. Returns (analytic, numeric, coords) lists aligned with
    `tensors`; when max_coords is set only that many randomly chosen
    coordinates per tensor are probed.
    """
    ad.reset_tape()
    loss = build()
    ad.backward(loss)
    analytic = []
    for t in tensors:
        g = np.zeros_like(t.values) if t.grad is None else t.grad.copy()
        analytic.append(g)
        t.grad = None

    def evaluate():
        with ad.no_grad():
            return float(build().values)

    numeric = []
    coords = []
    for t in tensors:
        flat = t.values.reshape(-1)
        if max_coords is not None and flat.size > max_coords:
            idx = rng.choice(flat.size, size=max_coords, replace=False)
        else:
            idx = np.arange(flat.size)
        fd = np.zeros(len(idx))
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            hi = evaluate()
            flat[i] = orig - eps
            lo = evaluate()
            flat[i] = orig
            fd[k] = (hi - lo) / (2 * eps)
        numeric.append(fd)
        coords.append(idx)
    return analytic, numeric, coords


def check_gradients(build, tensors, eps=1e-5, tol=1e-4, max_coords=None, rng=None):
    """Assert analytic grads match central finite differences."""
    analytic, numeric, coords = fd_gradients(build, tensors, eps, max_coords, rng)
    worst = 0.0
    for an, fd, idx in zip(analytic, numeric, coords):
        worst = max(worst, rel_err(an.reshape(-1)[idx], fd))
    assert worst < tol, f"gradient mismatch: worst relative error {worst:.3g}"
    return worst
