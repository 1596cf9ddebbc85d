"""Eigenvalues of small Hermitian matrices by cyclic Jacobi rotations.

Sized for the n <= 3 matrices this toolkit produces (restricted Levi forms,
complex Hessians); batched over leading axes and deterministic, so repeated
runs are bit-stable.
"""

from __future__ import annotations

import numpy as np

from .errors import NotHermitian

_SWEEPS = 16


def _rotate_pair(A, V, p, q):
    """Zero the (p, q) entries of a batch of Hermitian matrices in place.

    The unitary is G = diag(1, e^{-i phi}) . J(theta) acting on the (p, q)
    plane, with phi = arg A[p, q] and theta the classical Jacobi angle of the
    phase-stripped real 2x2 block.
    """
    apq = A[:, p, q]
    r = np.abs(apq)
    active = r > 1e-300
    if not np.any(active):
        return
    phase = np.where(active, apq / np.where(active, r, 1.0), 1.0)
    app = A[:, p, p].real
    aqq = A[:, q, q].real
    tau = np.where(active, (aqq - app) / (2.0 * np.where(active, r, 1.0)), 0.0)
    # smaller root of t^2 - 2 tau t - 1 = 0 for the J = [[c,-s],[s,c]] convention
    t = -np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    c = np.where(active, c, 1.0)[:, None]
    s = np.where(active, s, 0.0)[:, None]
    ph = phase[:, None]
    # columns: A <- A G with G[p,p]=c, G[p,q]=-s, G[q,p]=s/ph, G[q,q]=c/ph
    Ap = A[:, :, p].copy()
    Aq = A[:, :, q].copy()
    A[:, :, p] = c * Ap + s * np.conj(ph) * Aq
    A[:, :, q] = -s * Ap + c * np.conj(ph) * Aq
    # rows: A <- G^dagger A
    Rp = A[:, p, :].copy()
    Rq = A[:, q, :].copy()
    A[:, p, :] = c * Rp + s * ph * Rq
    A[:, q, :] = -s * Rp + c * ph * Rq
    A[:, p, q] = np.where(active[:], 0.0, A[:, p, q])
    A[:, q, p] = np.where(active[:], 0.0, A[:, q, p])
    Vp = V[:, :, p].copy()
    Vq = V[:, :, q].copy()
    V[:, :, p] = c * Vp + s * np.conj(ph) * Vq
    V[:, :, q] = -s * Vp + c * np.conj(ph) * Vq


def hermitian_eigh(H):
    """Ascending eigenvalues and eigenvectors of Hermitian matrices (..., n, n).

    Returns (w, V) with w[..., k] ascending and V[..., :, k] the matching
    unit eigenvectors with a deterministic phase.
    """
    H = np.asarray(H, dtype=complex)
    shape = H.shape
    nn = shape[-1]
    A = H.reshape(-1, nn, nn).copy()
    B = A.shape[0]
    V = np.broadcast_to(np.eye(nn, dtype=complex), (B, nn, nn)).copy()
    if nn > 1:
        pairs = [(p, q) for p in range(nn) for q in range(p + 1, nn)]
        norm = np.maximum(np.abs(A).max(axis=(1, 2)), 1e-300)
        for _ in range(_SWEEPS):
            off = 0.0
            for (p, q) in pairs:
                _rotate_pair(A, V, p, q)
            off = max(np.abs(A[:, p, q] / norm).max()
                      for (p, q) in pairs) if pairs else 0.0
            if off < 1e-15:
                break
    w = np.real(np.einsum("bii->bi", A))
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    # deterministic phase: largest-magnitude component made real positive
    k = np.argmax(np.abs(V), axis=1)
    lead = np.take_along_axis(V, k[:, None, :], axis=1)[:, 0, :]
    phase = np.where(np.abs(lead) > 0, lead / np.maximum(np.abs(lead), 1e-300),
                     1.0)
    V = V * np.conj(phase)[:, None, :]
    return w.reshape(shape[:-1]), V.reshape(shape)


def hermitian_check(H, tol=1e-8):
    """Raise NotHermitian when the symmetry defect exceeds tol * ||H||."""
    H = np.asarray(H, dtype=complex)
    norm = float(np.max(np.abs(H)))
    defect = float(np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))))
    if defect > tol * max(norm, 1e-300):
        raise NotHermitian(f"symmetry defect {defect:.3e} exceeds "
                           f"{tol:.1e} * norm {norm:.3e}")
    return H


def hermitian_min_eig(H, tol=1e-8):
    """Smallest eigenvalue of a Hermitian matrix (or batch)."""
    H = hermitian_check(H, tol)
    single = H.ndim == 2
    w, _ = hermitian_eigh(H if not single else H[None])
    w0 = w[..., 0]
    return float(w0[0]) if single else w0
