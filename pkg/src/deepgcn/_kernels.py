"""Fused elementwise and sparse kernels for the training hot path.

Single-pass loops beat numpy expression chains here because the chains
allocate temporaries and re-traverse multi-megabyte arrays several times per
layer. Forward kernels also accumulate the output total in-register, which
the op layer uses as a free non-finite detector (a pairwise or running sum is
non-finite iff some entry is, up to overflow of ~1e308-scale sums, which is
equally fatal). Every kernel is sequential and IEEE-ordered, so results are
bit-reproducible. Falls back to numpy when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return None
        return wrap


@njit(cache=True)
def _combine(a, ca, b, cb, out):
    total = 0.0
    for i in range(a.size):
        out[i] = ca * a[i] + cb * b[i]
        total += out[i]
    return total


@njit(cache=True)
def _accum_combined(acc, a, ca, b, cb):
    for i in range(acc.size):
        acc[i] += ca * a[i] + cb * b[i]


@njit(cache=True)
def _scale_copy(g, c, out):
    for i in range(g.size):
        out[i] = c * g[i]


@njit(cache=True)
def _accum_scaled(acc, g, c):
    for i in range(acc.size):
        acc[i] += c * g[i]


@njit(cache=True)
def _masked_copy(g, ref, out):
    # Branchless so the loop vectorizes.
    for i in range(g.size):
        out[i] = g[i] * (ref[i] > 0.0)


@njit(cache=True)
def _masked_accum(acc, g, ref):
    for i in range(acc.size):
        acc[i] += g[i] * (ref[i] > 0.0)


@njit(cache=True)
def _apply_mask(values, mask, scale, out):
    total = 0.0
    for i in range(values.size):
        out[i] = values[i] * (mask[i] * scale)
        total += out[i]
    return total


@njit(cache=True)
def _apply_mask_accum(acc, g, mask, scale):
    for i in range(acc.size):
        acc[i] += g[i] * (mask[i] * scale)


@njit(cache=True)
def _csr_matmul(indptr, indices, data, b, out):
    rows = indptr.size - 1
    cols = b.shape[1]
    total = 0.0
    for i in range(rows):
        oi = out[i]
        for j in range(cols):
            oi[j] = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            v = data[e]
            br = b[indices[e]]
            for j in range(cols):
                oi[j] += v * br[j]
        for j in range(cols):
            total += oi[j]
    return total


@njit(cache=True)
def _adam_update(p, g, m, v, wd, b1, b2, lr, c1, c2, eps):
    for i in range(p.size):
        gi = g[i] + wd * p[i]
        m[i] = b1 * m[i] + (1.0 - b1) * gi
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


def _flat(a: np.ndarray) -> np.ndarray:
    # reshape of a non-contiguous array would copy, silently breaking the
    # in-place kernels.
    assert a.flags.c_contiguous
    return a.reshape(-1)


def combine(a: np.ndarray, ca: float, b: np.ndarray, cb: float
            ) -> tuple[np.ndarray, float]:
    """ca * a + cb * b into a fresh array, plus the output total."""
    if HAVE_NUMBA:
        out = np.empty_like(a)
        total = _combine(_flat(a), ca, _flat(b), cb, _flat(out))
        return out, total
    out = ca * a + cb * b
    return out, float(out.sum())


def accum_combined(acc: np.ndarray, a: np.ndarray, ca: float,
                   b: np.ndarray, cb: float) -> None:
    if HAVE_NUMBA:
        _accum_combined(_flat(acc), _flat(a), ca, _flat(b), cb)
    else:
        acc += ca * a + cb * b


def scale_copy(g: np.ndarray, c: float) -> np.ndarray:
    if HAVE_NUMBA:
        out = np.empty_like(g)
        _scale_copy(_flat(g), c, _flat(out))
        return out
    return c * g


def accum_scaled(acc: np.ndarray, g: np.ndarray, c: float) -> None:
    if HAVE_NUMBA:
        _accum_scaled(_flat(acc), _flat(g), c)
    else:
        acc += c * g


def masked_copy(g: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """g where ref > 0, else 0."""
    if HAVE_NUMBA:
        out = np.empty_like(g)
        _masked_copy(_flat(g), _flat(ref), _flat(out))
        return out
    return g * (ref > 0.0)


def masked_accum(acc: np.ndarray, g: np.ndarray, ref: np.ndarray) -> None:
    if HAVE_NUMBA:
        _masked_accum(_flat(acc), _flat(g), _flat(ref))
    else:
        acc += g * (ref > 0.0)


def apply_mask(values: np.ndarray, mask: np.ndarray, scale: float
               ) -> tuple[np.ndarray, float]:
    """values * scale where mask, else 0 (inverted-dropout forward), plus total."""
    if HAVE_NUMBA:
        out = np.empty_like(values)
        total = _apply_mask(_flat(values), _flat(mask), scale, _flat(out))
        return out, total
    out = np.where(mask, values * scale, 0.0)
    return out, float(out.sum())


def apply_mask_grad(g: np.ndarray, mask: np.ndarray, scale: float) -> np.ndarray:
    if HAVE_NUMBA:
        out = np.empty_like(g)
        _apply_mask(_flat(g), _flat(mask), scale, _flat(out))
        return out
    return np.where(mask, g * scale, 0.0)


def apply_mask_accum(acc: np.ndarray, g: np.ndarray, mask: np.ndarray,
                     scale: float) -> None:
    if HAVE_NUMBA:
        _apply_mask_accum(_flat(acc), _flat(g), _flat(mask), scale)
    else:
        acc += np.where(mask, g * scale, 0.0)


def csr_matmul(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray,
               dense: np.ndarray) -> tuple[np.ndarray, float] | None:
    """CSR times dense matrix with the output total; None without numba."""
    if not HAVE_NUMBA:
        return None
    out = np.empty((indptr.size - 1, dense.shape[1]))
    total = _csr_matmul(indptr, indices, data, dense, out)
    return out, total


def adam_update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                wd: float, b1: float, b2: float, lr: float,
                c1: float, c2: float, eps: float) -> None:
    """One fused bias-corrected Adam update with coupled L2 decay."""
    if HAVE_NUMBA:
        _adam_update(_flat(p), _flat(g), _flat(m), _flat(v),
                     wd, b1, b2, lr, c1, c2, eps)
    else:
        gd = g + wd * p
        m *= b1
        m += (1.0 - b1) * gd
        v *= b2
        v += (1.0 - b2) * np.square(gd)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
