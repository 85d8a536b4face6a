"""Occupation-number bases of the symmetric spaces H_M and the ladder algebra on them.

H_M is the totally symmetric subspace of M copies of C^N. Its orthonormal
basis is labelled by occupation vectors n = (n_1, ..., n_N) with sum M.
Basis order is reverse-lexicographic on the counts, so (M, 0, ..., 0) has
index 0 and (0, ..., 0, M) comes last.

Modes are 0-based throughout the Python API.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache, total_ordering
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import ResourceLimitError

INT64_MAX = 2**63 - 1
DEFAULT_MAX_DIM = 20000
NORM_TOL = 1e-12


@total_ordering
@dataclass(frozen=True)
class OccupationVector:
    """Counts of quanta per mode. Orders so that (M, 0, ..., 0) is smallest."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative occupation in {self.counts}")

    @property
    def level(self) -> int:
        return sum(self.counts)

    @property
    def n_modes(self) -> int:
        return len(self.counts)

    def __lt__(self, other: "OccupationVector") -> bool:
        if not isinstance(other, OccupationVector):
            return NotImplemented
        # reverse-lexicographic: larger leading counts first
        return self.counts > other.counts


def dimension(n_modes: int, level: int) -> int:
    """Dimension of H_M, i.e. binomial(M + N - 1, N - 1), as an exact integer.

    Raises OverflowError if the value does not fit a signed 64-bit integer.
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    d = math.comb(level + n_modes - 1, n_modes - 1)
    if d > INT64_MAX:
        raise OverflowError(f"dim H_{level} for N={n_modes} exceeds 64-bit range")
    return d


def log_dimension(n_modes: int, level: int) -> float:
    """Natural log of dim H_M in floating point; usable beyond the 64-bit range."""
    return (math.lgamma(level + n_modes) - math.lgamma(level + 1)
            - math.lgamma(n_modes))


def multinomial(counts: Sequence[int]) -> int:
    """M! / prod(n_i!) for M = sum(counts)."""
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def _iter_counts(n_modes: int, level: int):
    if n_modes == 1:
        yield (level,)
        return
    for first in range(level, -1, -1):
        for rest in _iter_counts(n_modes - 1, level - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SymmetricSpace:
    """Catalog of H_M: ordered occupation basis plus a counts -> index map."""

    n_modes: int
    level: int
    basis: tuple[OccupationVector, ...]
    _index: dict = field(repr=False)
    counts: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index_of(self, occ: Union[OccupationVector, Sequence[int]]) -> int:
        key = occ.counts if isinstance(occ, OccupationVector) else tuple(occ)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"{key} is not a basis label of H_{self.level} "
                           f"(N={self.n_modes})") from None

    def __len__(self) -> int:
        return len(self.basis)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SymmetricSpace) and self.n_modes == other.n_modes
                and self.level == other.level)

    def __hash__(self) -> int:
        return hash((self.n_modes, self.level))

    @lru_cache(maxsize=None)
    def sqrt_multinomials(self) -> np.ndarray:
        """sqrt(M!/prod n_i!) for every basis vector, in basis order."""
        try:
            return np.sqrt(np.array([float(multinomial(o.counts)) for o in self.basis]))
        except OverflowError:
            lg = math.lgamma(self.level + 1) - np.array(
                [sum(math.lgamma(c + 1) for c in o.counts) for o in self.basis])
            return np.exp(0.5 * lg)

    @lru_cache(maxsize=None)
    def sqrt_factorial_products(self) -> np.ndarray:
        """sqrt(prod n_i!) for every basis vector."""
        try:
            return np.sqrt(np.array(
                [float(math.prod(math.factorial(c) for c in o.counts)) for o in self.basis]))
        except OverflowError:
            lg = np.array([sum(math.lgamma(c + 1) for c in o.counts) for o in self.basis])
            return np.exp(0.5 * lg)


@lru_cache(maxsize=256)
def _space(n_modes: int, level: int) -> SymmetricSpace:
    basis = tuple(OccupationVector(c) for c in _iter_counts(n_modes, level))
    index = {o.counts: i for i, o in enumerate(basis)}
    counts = np.array([o.counts for o in basis], dtype=np.int64).reshape(len(basis), n_modes)
    counts.setflags(write=False)
    return SymmetricSpace(n_modes, level, basis, index, counts)


def enumerate_basis(n_modes: int, level: int, max_dim: int = DEFAULT_MAX_DIM) -> SymmetricSpace:
    """Build (or fetch from cache) the canonical basis catalog of H_M."""
    d = dimension(n_modes, level)
    if d > max_dim:
        raise ResourceLimitError(f"H_{level} with N={n_modes}", d, max_dim)
    return _space(n_modes, level)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: SymmetricSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("state coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def normalized(self) -> "StateVector":
        return StateVector(self.space, self.coeffs / self.norm)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>, antilinear in self."""
        if self.space != other.space:
            raise ValueError("states live on different spaces")
        return complex(np.vdot(self.coeffs, other.coeffs))


def basis_state(space: SymmetricSpace, counts: Sequence[int]) -> StateVector:
    c = np.zeros(space.dim, dtype=complex)
    c[space.index_of(counts)] = 1.0
    return StateVector(space, c)


def _check_unit(u: np.ndarray, n_modes: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (n_modes,):
        raise ValueError(f"direction must have shape ({n_modes},), got {u.shape}")
    if abs(np.linalg.norm(u) - 1.0) > NORM_TOL:
        raise ValueError(f"direction is not a unit vector (norm {np.linalg.norm(u)!r})")
    return u


def coherent_vectors(space: SymmetricSpace, us: np.ndarray) -> np.ndarray:
    """Coefficient rows of the coherent vectors for a batch of directions (S, N).

    No normalization check; callers sampling on the sphere are trusted.
    """
    us = np.asarray(us, dtype=complex)
    powers = np.prod(us[:, None, :] ** space.counts[None, :, :], axis=2)
    return powers * space.sqrt_multinomials()[None, :]


def coherent_vector(space: SymmetricSpace, u) -> StateVector:
    """The product vector u x u x ... x u (M factors) in the occupation basis."""
    u = _check_unit(u, space.n_modes)
    return StateVector(space, coherent_vectors(space, u[None, :])[0])


@lru_cache(maxsize=4096)
def lowering_map(n_modes: int, level: int, m: tuple[int, ...]):
    """Sparse data of A(m) = prod_i a_i^{m_i} : H_level -> H_{level - |m|}.

    Returns (src, dst, coef): basis vector src of H_level maps to
    coef * basis vector dst of the lower space. Labels with p < m are absent.
    """
    src_space = _space(n_modes, level)
    k = sum(m)
    if k > level:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    dst_space = _space(n_modes, level - k)
    mv = np.asarray(m, dtype=np.int64)
    counts = src_space.counts
    src = np.flatnonzero(np.all(counts >= mv, axis=1))
    lowered = counts[src] - mv
    dst = np.array([dst_space.index_of(tuple(r)) for r in lowered], dtype=np.int64)
    # prod_i sqrt(p_i! / (p_i - m_i)!), exact integers unless the float would overflow
    try:
        coef = np.sqrt(np.array([float(_falling(p, mv)) for p in counts[src]]))
    except OverflowError:
        lg = np.zeros(len(src))
        for i, mi in enumerate(m):
            if mi:
                p = counts[src, i]
                lg += np.array([math.lgamma(x + 1) - math.lgamma(x - mi + 1) for x in p])
        coef = np.exp(0.5 * lg)
    for arr in (src, dst, coef):
        arr.setflags(write=False)
    return src, dst, coef


def _falling(p: np.ndarray, m: np.ndarray) -> int:
    out = 1
    for pi, mi in zip(p.tolist(), m.tolist()):
        out *= math.perm(pi, mi)
    return out


class Ladder(str, enum.Enum):
    CREATE = "create"
    ANNIHILATE = "annihilate"


@lru_cache(maxsize=1024)
def _annihilation_matrix(n_modes: int, level: int, mode: int) -> sp.csr_matrix:
    # a_i : H_level -> H_{level-1}
    e = tuple(1 if j == mode else 0 for j in range(n_modes))
    src, dst, coef = lowering_map(n_modes, level, e)
    shape = (dimension(n_modes, level - 1), dimension(n_modes, level))
    return sp.csr_matrix((coef, (dst, src)), shape=shape)


def ladder_matrix(n_modes: int, level: int, kind: Union[Ladder, str], direction) -> sp.csr_matrix:
    """Sparse matrix of a ladder operator acting on H_level.

    ``direction`` is a mode index or a complex N-vector w. For a vector,
    creation is a*(w) = sum_i w_i a_i* and annihilation a(w) = sum_i conj(w_i) a_i.
    """
    kind = Ladder(kind)
    if kind is Ladder.ANNIHILATE and level < 1:
        raise ValueError("cannot annihilate on the level-0 space")
    if isinstance(direction, (int, np.integer)):
        if not 0 <= direction < n_modes:
            raise IndexError(f"mode {direction} out of range for N={n_modes}")
        weights = {int(direction): 1.0}
    else:
        w = np.asarray(direction, dtype=complex)
        if w.shape != (n_modes,):
            raise ValueError(f"direction must have shape ({n_modes},), got {w.shape}")
        weights = {i: wi for i, wi in enumerate(w) if wi != 0}
    if kind is Ladder.CREATE:
        shape = (dimension(n_modes, level + 1), dimension(n_modes, level))
        out = sp.csr_matrix(shape, dtype=complex)
        for i, wi in weights.items():
            out = out + wi * _annihilation_matrix(n_modes, level + 1, i).T
    else:
        shape = (dimension(n_modes, level - 1), dimension(n_modes, level))
        out = sp.csr_matrix(shape, dtype=complex)
        for i, wi in weights.items():
            out = out + np.conj(wi) * _annihilation_matrix(n_modes, level, i)
    return out.tocsr()


def apply_ladder(kind: Union[Ladder, str], direction, state: StateVector) -> StateVector:
    """Apply a creation or annihilation operator, moving the state one level up or down."""
    space = state.space
    kind = Ladder(kind)
    if kind is Ladder.ANNIHILATE and space.level < 1:
        raise ValueError("annihilating a level-0 state")
    mat = ladder_matrix(space.n_modes, space.level, kind, direction)
    new_level = space.level + (1 if kind is Ladder.CREATE else -1)
    return StateVector(_space(space.n_modes, new_level), mat @ state.coeffs)


def number_operator(space: SymmetricSpace, direction=None) -> np.ndarray:
    """Dense matrix of sum_i a_i* a_i, or of a*(u) a(u) when a direction u is given."""
    if space.level == 0:
        return np.zeros((1, 1), dtype=complex)
    N, M = space.n_modes, space.level
    if direction is None:
        return np.diag(space.counts.sum(axis=1).astype(complex))
    down = ladder_matrix(N, M, Ladder.ANNIHILATE, direction)
    up = ladder_matrix(N, M - 1, Ladder.CREATE, direction)
    return (up @ down).toarray()
