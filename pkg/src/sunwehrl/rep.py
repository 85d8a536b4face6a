"""The action of U(N) on H_M by symmetric tensor powers, and its gl(N) generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .fock import Ladder, SymmetricSpace, _space, ladder_matrix

UNITARY_TOL = 1e-10
COMMUTANT_MAX_UNKNOWNS = 5000


@dataclass(frozen=True, eq=False)
class GroupElement:
    """An N x N matrix acting on C^N. ``unitary=True`` is checked, det=1 is not."""

    matrix: np.ndarray
    unitary: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"group element must be square, got shape {m.shape}")
        if self.unitary:
            err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if err > UNITARY_TOL:
                raise ValueError(f"matrix flagged unitary but |U*U - I|_max = {err:.2e}")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def random_unitary(n: int, rng: np.random.Generator) -> GroupElement:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))[None, :]
    return GroupElement(q)


def symmetric_power(space: SymmetricSpace, U) -> np.ndarray:
    """Matrix of pi(U) = U x U x ... x U restricted to H_M.

    Built level by level: |n> = a_i* |n - e_i> / sqrt(n_i) and
    pi(U) a_i* pi(U)^-1 = sum_j U_ji a_j*, so each column at level L is one
    sparse creation applied to a column of level L - 1.
    """
    mat = U.matrix if isinstance(U, GroupElement) else np.asarray(U, dtype=complex)
    N = space.n_modes
    if mat.shape != (N, N):
        raise ValueError(f"expected a {N}x{N} matrix, got {mat.shape}")
    prev = np.ones((1, 1), dtype=complex)
    for level in range(1, space.level + 1):
        cur_space = _space(N, level)
        lower = _space(N, level - 1)
        counts = cur_space.counts
        first = np.argmax(counts > 0, axis=1)
        cur = np.empty((cur_space.dim, cur_space.dim), dtype=complex)
        for i in range(N):
            cols = np.flatnonzero(first == i)
            if cols.size == 0:
                continue
            preds = [lower.index_of(tuple(r)) for r in counts[cols] - np.eye(N, dtype=np.int64)[i]]
            create = ladder_matrix(N, level - 1, Ladder.CREATE, mat[:, i])
            cur[:, cols] = (create @ prev[:, preds]) / np.sqrt(counts[cols, i])[None, :]
        prev = cur
    return prev


def weight_generator(space: SymmetricSpace, i: int, j: int) -> np.ndarray:
    """E_ij = a_i* a_j on H_M: the image of |e_i><e_j| summed over tensor factors."""
    N = space.n_modes
    for idx in (i, j):
        if not 0 <= idx < N:
            raise IndexError(f"mode {idx} out of range for N={N}")
    counts = space.counts
    if i == j:
        return np.diag(counts[:, i].astype(float))
    out = np.zeros((space.dim, space.dim))
    cols = np.flatnonzero(counts[:, j] > 0)
    targets = counts[cols].copy()
    targets[:, j] -= 1
    targets[:, i] += 1
    rows = [space.index_of(tuple(t)) for t in targets]
    # sqrt of the exact integer product avoids a rounded sqrt(n) * sqrt(n)
    out[rows, cols] = np.sqrt(counts[cols, j] * targets[:, i])
    return out


def commutant_dimension(space: SymmetricSpace, rel_tol: float = 1e-8,
                        max_unknowns: int = COMMUTANT_MAX_UNKNOWNS) -> int:
    """Dimension of {A : [A, E_ij] = 0 for all i, j}; equals 1 iff H_M is irreducible."""
    d = space.dim
    if d * d > max_unknowns:
        raise ResourceLimitError("commutant system", d * d, max_unknowns)
    N = space.n_modes
    eye = np.eye(d)
    # row-major vec: vec(A E) = (I kron E^T) vec(A), vec(E A) = (E kron I) vec(A)
    blocks = []
    for i in range(N):
        for j in range(N):
            E = weight_generator(space, i, j)
            blocks.append(np.kron(eye, E.T) - np.kron(E, eye))
    system = np.vstack(blocks)
    if not np.any(system):
        return d * d
    # E_ij are real, so the real null space has the same dimension as the complex one
    r = np.linalg.qr(system, mode="r")
    s = np.linalg.svd(r, compute_uv=False)
    return int(np.sum(s <= rel_tol * s[0])) + max(0, d * d - len(s))
