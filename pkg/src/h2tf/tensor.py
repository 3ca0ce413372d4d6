"""Dense order-3 tensor algebra.

Tensors are numpy arrays of shape ``(h, w, b)``; the k-th frontal slice is
the ``h x w`` matrix ``x[:, :, k]``.  The canonical element order used by
the on-disk container is frontal-slice-major (slice k contiguous, row-major
within a slice); see :mod:`h2tf.tensorfile`.

The forward-difference operators use circular (periodic) boundaries.  This
is an implementation choice: it makes each operator an exact linear map
with an exact adjoint, which the gradient engine relies on.
"""

import numpy as np


def _as_tensor3(x, name="x"):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"{name} must be an order-3 array, got shape {x.shape}")
    return x


def frontal_slice(x, k):
    """Return a copy of the k-th frontal (h x w) slice of ``x``."""
    x = _as_tensor3(x)
    if not 0 <= k < x.shape[2]:
        raise IndexError(f"slice index {k} out of range for b={x.shape[2]}")
    return x[:, :, k].copy()


def facewise_product(a, b):
    """Slice-by-slice matrix product of two order-3 tensors.

    ``a`` has shape ``(p, q, nb)`` and ``b`` shape ``(q, r, nb)``; the
    result has shape ``(p, r, nb)`` with slice k equal to
    ``a[:, :, k] @ b[:, :, k]``.
    """
    a = _as_tensor3(a, "a")
    b = _as_tensor3(b, "b")
    if a.shape[2] != b.shape[2]:
        raise ValueError(f"slice counts differ: {a.shape[2]} vs {b.shape[2]}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    out = np.matmul(np.moveaxis(a, 2, 0), np.moveaxis(b, 2, 0))
    return np.moveaxis(out, 0, 2)


def mode3_product(z, h):
    """Contract the third mode of ``z`` (h, w, b) with a matrix ``h`` (b', b).

    ``out[i, j, k'] = sum_k h[k', k] * z[i, j, k]``.
    """
    z = _as_tensor3(z, "z")
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError(f"h must be a matrix, got shape {h.shape}")
    if h.shape[1] != z.shape[2]:
        raise ValueError(f"h has {h.shape[1]} columns but z has {z.shape[2]} slices")
    return np.tensordot(z, h, axes=([2], [1]))


def diff_x(x):
    """Circular forward difference along the first (row) index."""
    x = _as_tensor3(x)
    return np.roll(x, -1, axis=0) - x


def diff_y(x):
    """Circular forward difference along the second (column) index."""
    x = _as_tensor3(x)
    return np.roll(x, -1, axis=1) - x


def diff_z(x):
    """Circular forward difference along the third (band) index."""
    x = _as_tensor3(x)
    return np.roll(x, -1, axis=2) - x


def diff_x_adjoint(g):
    """Exact adjoint of :func:`diff_x`: <diff_x(x), g> == <x, diff_x_adjoint(g)>."""
    g = _as_tensor3(g, "g")
    return np.roll(g, 1, axis=0) - g


def diff_y_adjoint(g):
    """Exact adjoint of :func:`diff_y`."""
    g = _as_tensor3(g, "g")
    return np.roll(g, 1, axis=1) - g


def diff_z_adjoint(g):
    """Exact adjoint of :func:`diff_z`."""
    g = _as_tensor3(g, "g")
    return np.roll(g, 1, axis=2) - g


def dft_matrix(n):
    """The n x n DFT matrix ``F[k, j] = exp(-2i pi k j / n)`` (complex)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def inverse_dft_matrix(n):
    """Inverse of :func:`dft_matrix`: conjugate transpose scaled by 1/n."""
    return dft_matrix(n).conj().T / n


def tubal_rank(x, tol):
    """Tubal rank of ``x`` under the Fourier transform along the third mode.

    Applies the DFT along mode 3, takes the singular values of every
    (complex) frontal slice, and counts the singular-value positions whose
    maximum over slices exceeds ``tol`` times the overall largest singular
    value.  Computed in 64-bit regardless of the input precision.
    """
    x = _as_tensor3(x)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains non-finite entries")
    xf = np.fft.fft(x.astype(np.float64, copy=False), axis=2)
    sv = np.stack([np.linalg.svd(xf[:, :, k], compute_uv=False)
                   for k in range(x.shape[2])])
    tube_max = sv.max(axis=0)
    overall = tube_max.max(initial=0.0)
    if overall == 0.0:
        return 0
    return int(np.count_nonzero(tube_max > tol * overall))


def soft_threshold(x, v):
    """Elementwise soft threshold ``sign(x) * max(|x| - v, 0)``."""
    if v < 0:
        raise ValueError(f"threshold must be nonnegative, got {v}")
    x = np.asarray(x)
    return np.sign(x) * np.maximum(np.abs(x) - v, 0.0)
