"""Cloning maps T^k, reduced density matrices, the measure-and-prepare operator W_k.

T^k(G) = sum_{i_1..i_k} a*_{i_1} ... a*_{i_k} G a_{i_k} ... a_{i_1} maps operators
on H_M to operators on H_{M+k}. Ordered index tuples sharing an occupation
type m act identically, so the sum is evaluated once per m with weight
k!/prod(m_i!).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import IllConditionedFit, ResourceLimitError
from .fock import (
    DEFAULT_MAX_DIM,
    INT64_MAX,
    StateVector,
    SymmetricSpace,
    _space,
    dimension,
    lowering_map,
    multinomial,
)
from .majorization import SpectrumSequence, spectrum
from .seeding import stream

HERMITIAN_TOL = 1e-11
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense operator on a symmetric space, with flags for the properties it claims.

    ``vanishing`` marks a reduced density matrix requested above the state's
    level, which is identically zero.
    """

    space: SymmetricSpace
    matrix: np.ndarray
    hermitian: bool = True
    psd: bool = False
    unit_trace: bool = False
    vanishing: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def check(self) -> "HermitianOperator":
        """Verify every flagged property; raise ValueError on the first failure."""
        m = self.matrix
        scale = max(1.0, float(np.max(np.abs(m))))
        if self.hermitian:
            asym = float(np.max(np.abs(m - m.conj().T)))
            if asym > HERMITIAN_TOL * scale:
                raise ValueError(f"not Hermitian: |A - A*|_max = {asym:.2e}")
        if self.psd:
            lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
            if lo < -PSD_TOL * scale:
                raise ValueError(f"not positive semidefinite: min eigenvalue {lo:.2e}")
        if self.unit_trace and abs(self.trace - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {self.trace!r} is not 1")
        return self

    @classmethod
    def projector(cls, psi: StateVector) -> "HermitianOperator":
        if not psi.is_normalized():
            raise ValueError("projector needs a normalized state")
        c = psi.coeffs
        return cls(psi.space, np.outer(c, c.conj()), psd=True, unit_trace=True)

    @classmethod
    def maximally_mixed(cls, space: SymmetricSpace) -> "HermitianOperator":
        return cls(space, np.eye(space.dim) / space.dim, psd=True, unit_trace=True)

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(self.space, self.matrix * factor, self.hermitian,
                                 self.psd and factor >= 0, False, self.vanishing)


def random_state(space: SymmetricSpace, rng: np.random.Generator) -> StateVector:
    """Normalized vector with i.i.d. complex Gaussian coefficients."""
    z = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
    return StateVector(space, z / np.linalg.norm(z))


def random_density(space: SymmetricSpace, rng: np.random.Generator) -> HermitianOperator:
    """Hilbert-Schmidt random density matrix G G* / Tr(G G*)."""
    d = space.dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return HermitianOperator(space, rho / np.trace(rho).real, psd=True, unit_trace=True)


def _guard(n_modes: int, level: int, max_dim: int) -> SymmetricSpace:
    d = dimension(n_modes, level)
    if d > max_dim:
        raise ResourceLimitError(f"H_{level} with N={n_modes}", d, max_dim)
    return _space(n_modes, level)


def trace_factor(n_modes: int, level: int, k: int) -> int:
    """(M+k+N-1)! / (M+N-1)!: the trace of T^k applied to a unit-trace operator."""
    return math.perm(level + k + n_modes - 1, k)


@lru_cache(maxsize=512)
def _cloning_plan(n_modes: int, level: int, k: int):
    """Per occupation type m with |m| = k: (weight, rows in H_{M+k}, rows in H_M, coef)."""
    plan = []
    for occ in _space(n_modes, k).basis:
        src, dst, coef = lowering_map(n_modes, level + k, occ.counts)
        plan.append((float(multinomial(occ.counts)), src, dst, coef))
    return plan


def cloning_apply(gamma: HermitianOperator, k: int,
                  max_dim: int = DEFAULT_MAX_DIM) -> HermitianOperator:
    """T^k(gamma) on H_{M+k}; not trace preserving (see ``trace_factor``)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    space = gamma.space
    N, M = space.n_modes, space.level
    target = _guard(N, M + k, max_dim)
    if k == 0:
        return HermitianOperator(space, gamma.matrix.copy(), gamma.hermitian, gamma.psd,
                                 gamma.unit_trace, gamma.vanishing)
    G = gamma.matrix
    out = np.zeros((target.dim, target.dim), dtype=complex)
    for weight, src, dst, coef in _cloning_plan(N, M, k):
        out[np.ix_(src, src)] += (weight * np.outer(coef, coef)) * G[np.ix_(dst, dst)]
    return HermitianOperator(target, out, gamma.hermitian, gamma.psd, False, gamma.vanishing)


def normalized_cloning(rho: HermitianOperator, k: int,
                       max_dim: int = DEFAULT_MAX_DIM) -> HermitianOperator:
    """The trace-preserving cloning channel: T^k scaled by (M+N-1)!/(M+k+N-1)!."""
    if not (rho.psd and rho.unit_trace):
        raise ValueError("normalized cloning expects a density matrix (psd, unit trace)")
    out = cloning_apply(rho, k, max_dim)
    factor = trace_factor(rho.space.n_modes, rho.space.level, k)
    return HermitianOperator(out.space, out.matrix / factor, True, True, True)


def _lowered_rows(psi: StateVector, ell: int) -> np.ndarray:
    """Rows A(p) psi / sqrt(prod p_i!) for p in H_ell; shape (dim H_ell, dim H_{M-ell})."""
    N, M = psi.space.n_modes, psi.space.level
    labels = _space(N, ell)
    rows = np.zeros((labels.dim, dimension(N, M - ell)), dtype=complex)
    norms = labels.sqrt_factorial_products()
    for r, occ in enumerate(labels.basis):
        src, dst, coef = lowering_map(N, M, occ.counts)
        rows[r, dst] = coef * psi.coeffs[src] / norms[r]
    return rows


def _raised_rows(psi: StateVector, k: int) -> np.ndarray:
    """Rows A*(p) psi / sqrt(prod p_i!) for p in H_k; shape (dim H_k, dim H_{M+k})."""
    N, M = psi.space.n_modes, psi.space.level
    labels = _space(N, k)
    rows = np.zeros((labels.dim, dimension(N, M + k)), dtype=complex)
    norms = labels.sqrt_factorial_products()
    for r, occ in enumerate(labels.basis):
        # A*(p) : H_M -> H_{M+k} is the transpose of A(p) : H_{M+k} -> H_M
        src, dst, coef = lowering_map(N, M + k, occ.counts)
        rows[r, src] = coef * psi.coeffs[dst] / norms[r]
    return rows


def reduced_density(psi: StateVector, ell: int) -> HermitianOperator:
    """The ell-particle reduced density matrix, normalized to trace M!/(M-ell)!.

    Entry (p, q) is ell! <A(q) psi, A(p) psi> / sqrt(prod p_i! prod q_i!).
    For ell > M the result is the zero operator with ``vanishing`` set.
    """
    N, M = psi.space.n_modes, psi.space.level
    if ell < 0:
        raise ValueError(f"ell must be >= 0, got {ell}")
    if not psi.is_normalized():
        raise ValueError("reduced density matrices need a normalized state")
    space = _space(N, ell)
    if ell > M:
        return HermitianOperator(space, np.zeros((space.dim, space.dim)), psd=True,
                                 vanishing=True)
    R = _lowered_rows(psi, ell)
    gram = math.factorial(ell) * (R @ R.conj().T)
    return HermitianOperator(space, gram, psd=True, unit_trace=(ell == 0 or M == ell == 1))


def measure_prepare(psi: StateVector, k: int) -> HermitianOperator:
    """W_k(|psi><psi|) on H_k, entry (p, q) = k! <A*(p) psi, A*(q) psi> / sqrt(prod p! prod q!).

    Shares its non-zero spectrum with T^k(|psi><psi|).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if not psi.is_normalized():
        raise ValueError("measure_prepare needs a normalized state")
    S = _raised_rows(psi, k)
    gram = math.factorial(k) * (S.conj() @ S.T)
    return HermitianOperator(_space(psi.space.n_modes, k), gram, psd=True,
                             unit_trace=(k == 0))


@dataclass(frozen=True)
class DecompositionConstants:
    k: int
    values: tuple[float, ...]
    residual: float
    condition: float

    def predict(self, psi: StateVector) -> np.ndarray:
        """sum_l C_l T^l(gamma^(k-l)_psi) as a dense matrix on H_k."""
        return sum(c * m for c, m in zip(self.values, _decomposition_terms(psi, self.k)))

    def residual_on(self, psi: StateVector) -> float:
        """Relative max-entry mismatch against W_k(|psi><psi|)."""
        target = measure_prepare(psi, self.k).matrix
        return float(np.max(np.abs(target - self.predict(psi))) / np.max(np.abs(target)))


def _decomposition_terms(psi: StateVector, k: int) -> list[np.ndarray]:
    return [cloning_apply(reduced_density(psi, k - ell), ell).matrix for ell in range(k + 1)]


def decomposition_constants(n_modes: int, level: int, k: int, trials: int, seed: int,
                            max_condition: float = 1e8) -> DecompositionConstants:
    """Least-squares fit of C_0..C_k in W_k = sum_l C_l T^l(gamma^(k-l)) over random states."""
    if k < 0 or k > level:
        raise ValueError(f"need 0 <= k <= M, got k={k}, M={level}")
    if trials < k + 2:
        raise ValueError(f"need at least k + 2 = {k + 2} trials, got {trials}")
    space = _space(n_modes, level)
    rows, rhs = [], []
    for t in range(trials):
        psi = random_state(space, stream(seed, "decomposition", t))
        terms = _decomposition_terms(psi, k)
        rows.append(np.stack([m.ravel() for m in terms], axis=1))
        rhs.append(measure_prepare(psi, k).matrix.ravel())
    X = np.vstack(rows)
    y = np.concatenate(rhs)
    X = np.vstack([X.real, X.imag])
    y = np.concatenate([y.real, y.imag])
    cond = float(np.linalg.cond(X))
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedFit(f"design matrix condition {cond:.2e}; use more trials")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.max(np.abs(X @ coef - y)) / np.max(np.abs(y)))
    if resid > 1e-8:
        raise ArithmeticError(f"decomposition residual {resid:.2e} exceeds 1e-8")
    if np.any(coef < -1e-9):
        raise ArithmeticError(f"negative fitted constants {coef}")
    return DecompositionConstants(k, tuple(float(c) for c in coef), resid, cond)


def _coherent_eigenvalue(k: int, level: int, m: int) -> float:
    """k! m! / (M! (m-M)!) = k! * binomial(m, M)."""
    exact = math.factorial(k) * math.comb(m, level)
    if exact <= INT64_MAX:
        return float(exact)
    return math.exp(math.lgamma(k + 1) + math.lgamma(m + 1) - math.lgamma(level + 1)
                    - math.lgamma(m - level + 1))


def coherent_output_levels(n_modes: int, level: int, k: int) -> list[tuple[float, int]]:
    """(eigenvalue, multiplicity) pairs of T^k applied to a coherent projector.

    The eigenvalue for number m = M..M+k along the coherent direction is
    k! m!/(M!(m-M)!), with multiplicity binomial(M+k-m+N-2, N-2); the zero
    eigenvalue takes the remaining dim H_{M+k} - dim H_k. Sorted descending.
    """
    N, M = n_modes, level
    if N < 1 or M < 0 or k < 0:
        raise ValueError("need N >= 1, M >= 0, k >= 0")
    out = []
    for m in range(M + k, M - 1, -1):
        mult = math.comb(M + k - m + N - 2, N - 2) if N >= 2 else int(m == M + k)
        if mult:
            out.append((_coherent_eigenvalue(k, M, m), mult))
    zeros = dimension(N, M + k) - dimension(N, k)
    if zeros:
        out.append((0.0, zeros))
    return out


def coherent_output_spectrum(n_modes: int, level: int, k: int,
                             max_dim: int = DEFAULT_MAX_DIM) -> SpectrumSequence:
    """Full spectrum of T^k(|coherent><coherent|), zeros included, from closed forms."""
    d = dimension(n_modes, level + k)
    if d > max_dim:
        raise ResourceLimitError("coherent output spectrum", d, max_dim)
    return SpectrumSequence.from_multiplicities(coherent_output_levels(n_modes, level, k))


def directional_spectrum_fn(k: int, ell: int) -> Callable:
    """f_l(m) = l! m!/(m-(k-l))! for m >= k-l, else 0.

    T^l(a*(u)^(k-l) a(u)^(k-l)) equals f_l applied to the number operator
    a*(u) a(u) on H_k.
    """
    if not 0 <= ell <= k:
        raise ValueError(f"need 0 <= ell <= k, got ell={ell}, k={k}")
    r = k - ell
    lf = math.factorial(ell)

    def f(m):
        if np.ndim(m) == 0:
            m = int(m)
            return float(lf * math.perm(m, r)) if m >= r else 0.0
        return np.array([f(x) for x in np.asarray(m).ravel()]).reshape(np.shape(m))

    f.__name__ = f"f_{ell}_k{k}"
    return f


def coherence_defect(psi: StateVector) -> float:
    """M minus the top eigenvalue of the one-particle density matrix; 0 iff psi is coherent."""
    if psi.space.level < 1:
        raise ValueError("coherence defect needs M >= 1")
    top = spectrum(reduced_density(psi, 1)).values[0]
    return max(0.0, float(psi.space.level - top))
