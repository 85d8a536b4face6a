"""Ordered spectra, majorization verdicts and concave-trace (Karamata) comparisons."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import entr

HERMITIAN_TOL = 1e-11
DOMAIN_TOL = 1e-12
CONCAVITY_GRID = 1001


@dataclass(frozen=True, eq=False)
class SpectrumSequence:
    """Real eigenvalues in non-increasing order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size > 1 and np.any(np.diff(v) > 0):
            raise ValueError("spectrum values must be sorted non-increasing")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unsorted(cls, values) -> "SpectrumSequence":
        return cls(np.sort(np.asarray(values, dtype=float).ravel())[::-1])

    @classmethod
    def from_multiplicities(cls, pairs: Iterable[tuple[float, int]]) -> "SpectrumSequence":
        vals = [v for v, mult in pairs for _ in range(int(mult))]
        return cls.from_unsorted(vals)

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def __len__(self) -> int:
        return self.values.size

    def distinct(self, tol: float = 1e-9) -> list[tuple[float, int]]:
        """Group eigenvalues closer than ``tol * (1 + |value|)`` into (value, multiplicity)."""
        out: list[tuple[float, int]] = []
        for v in self.values:
            if out and abs(out[-1][0] - v) <= tol * (1 + abs(v)):
                out[-1] = (out[-1][0], out[-1][1] + 1)
            else:
                out.append((float(v), 1))
        return out

    def padded(self, length: int) -> "SpectrumSequence":
        """Append zeros up to ``length``. Only valid for non-negative spectra."""
        if length < len(self):
            raise ValueError("cannot pad to a shorter length")
        if len(self) and self.values[-1] < -DOMAIN_TOL * (1 + abs(self.total)):
            raise ValueError("zero padding would break the ordering of a negative spectrum")
        return SpectrumSequence(np.concatenate([self.values, np.zeros(length - len(self))]))

    def scaled(self, factor: float) -> "SpectrumSequence":
        if factor < 0:
            raise ValueError("negative scaling reverses the order")
        return SpectrumSequence(self.values * factor)


def spectrum(A, check: bool = True) -> SpectrumSequence:
    """Eigenvalues of a Hermitian matrix (or of anything with a ``.matrix``), descending."""
    mat = np.asarray(getattr(A, "matrix", A))
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    asym = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    if asym > HERMITIAN_TOL * max(1.0, scale):
        raise ValueError(f"matrix is not Hermitian (|A - A*|_max = {asym:.2e})")
    herm = 0.5 * (mat + mat.conj().T)
    w, v = np.linalg.eigh(herm)
    if check and scale > 0:
        resid = np.max(np.abs(herm - (v * w) @ v.conj().T))
        if resid > 1e-9 * scale:
            raise np.linalg.LinAlgError(f"eigendecomposition residual {resid:.2e} too large")
    return SpectrumSequence(w[::-1])


class Verdict(str, enum.Enum):
    STRICT = "strict"
    EQUAL = "equal"
    WEAK = "weak"
    NO = "no"


@dataclass(frozen=True)
class MajorizationResult:
    verdict: Verdict
    first_violation: Optional[int]
    margin: float
    """Largest partial-sum excess of x over y."""
    deficit: float
    """Most negative partial-sum difference (0 if none)."""
    tol: float

    @property
    def holds(self) -> bool:
        return self.verdict in (Verdict.STRICT, Verdict.EQUAL)


def default_tol(total: float) -> float:
    return 1e-9 * (1.0 + abs(total))


def majorizes(x: SpectrumSequence, y: SpectrumSequence, tol: Optional[float] = None,
              allow_weak: bool = False) -> MajorizationResult:
    """Does the ordered sequence x majorize y?

    STRICT: every partial sum of x is at least that of y (within ``tol``), totals
    agree, and some partial sum exceeds by more than ``tol``. EQUAL: all partial
    sums agree within ``tol``. NO: some partial sum of x falls short by more than
    ``tol``; ``first_violation`` is its 0-based index.

    Totals that differ by more than ``tol`` raise ValueError, unless
    ``allow_weak`` is set, in which case dominating partial sums give WEAK
    (weak majorization from below).
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch {len(x)} vs {len(y)}; pad explicitly")
    if tol is None:
        tol = default_tol(x.total)
    diff = np.cumsum(x.values) - np.cumsum(y.values)
    totals_agree = abs(diff[-1]) <= tol if diff.size else True
    if not totals_agree and not allow_weak:
        raise ValueError(f"totals differ by {diff[-1]:.3e} > tol {tol:.1e}")
    margin = float(diff.max()) if diff.size else 0.0
    deficit = float(min(diff.min(), 0.0)) if diff.size else 0.0
    bad = np.flatnonzero(diff < -tol)
    if bad.size:
        return MajorizationResult(Verdict.NO, int(bad[0]), margin, deficit, tol)
    if not totals_agree:
        return MajorizationResult(Verdict.WEAK, None, margin, deficit, tol)
    if margin > tol:
        return MajorizationResult(Verdict.STRICT, None, margin, deficit, tol)
    return MajorizationResult(Verdict.EQUAL, None, margin, deficit, tol)


@dataclass(frozen=True, eq=False)
class ConcaveFn:
    """A concave function on [0, 1], selected from a small checkable family.

    kinds: ``entropy`` (-x ln x, 0 at 0), ``power`` (x**p, 0 < p < 1),
    ``kink`` (min(x, t)), ``affine`` (a*x + b) and ``table`` (piecewise linear
    through the points ``xs``, ``ys``).
    """

    kind: str
    params: tuple = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        k = self.kind
        if k == "entropy":
            pass
        elif k == "power":
            (p,) = self.params
            if not 0 < p < 1:
                raise ValueError(f"power exponent must lie in (0, 1), got {p}")
        elif k == "kink":
            (t,) = self.params
            if not 0 <= t <= 1:
                raise ValueError(f"kink location must lie in [0, 1], got {t}")
        elif k == "affine":
            a, b = self.params
        elif k == "table":
            xs, ys = (np.asarray(v, dtype=float) for v in self.params)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
                raise ValueError("table needs matching 1-D xs, ys with at least 2 points")
            if np.any(np.diff(xs) <= 0) or xs[0] > 0 or xs[-1] < 1:
                raise ValueError("table xs must be increasing and cover [0, 1]")
            slopes = np.diff(ys) / np.diff(xs)
            if np.any(np.diff(slopes) > 1e-12 * (1 + np.abs(slopes[1:]))):
                raise ValueError("table is not concave (slopes increase)")
            object.__setattr__(self, "params", (tuple(xs), tuple(ys)))
        else:
            raise ValueError(f"unknown concave function kind {k!r}")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())
        self._check_concave()

    def _default_label(self) -> str:
        if self.kind == "entropy":
            return "entropy"
        if self.kind == "table":
            return f"table[{len(self.params[0])}]"
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)

    def _check_concave(self):
        x = np.linspace(0.0, 1.0, CONCAVITY_GRID)
        y = self._eval(x)
        if np.any(y[1:-1] < 0.5 * (y[:-2] + y[2:]) - 1e-12):
            raise ValueError(f"{self.label} fails the midpoint concavity check")

    @classmethod
    def entropy(cls) -> "ConcaveFn":
        return cls("entropy")

    @classmethod
    def power(cls, p: float) -> "ConcaveFn":
        return cls("power", (float(p),))

    @classmethod
    def kink(cls, t: float) -> "ConcaveFn":
        return cls("kink", (float(t),))

    @classmethod
    def affine(cls, a: float, b: float) -> "ConcaveFn":
        return cls("affine", (float(a), float(b)))

    @classmethod
    def const(cls, c: float) -> "ConcaveFn":
        return cls("affine", (0.0, float(c)), label=f"const:{c:g}")

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float]) -> "ConcaveFn":
        return cls("table", (tuple(xs), tuple(ys)))

    @classmethod
    def random_table(cls, rng: np.random.Generator, knots: int = 6) -> "ConcaveFn":
        """Random concave piecewise-linear function with ``knots`` interior breakpoints."""
        xs = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, knots)), [1.0]])
        slopes = np.sort(rng.normal(0, 3, knots + 1))[::-1]
        ys = np.concatenate([[rng.normal()], np.cumsum(slopes * np.diff(xs))])
        ys[1:] += ys[0]
        return cls.table(xs, ys)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Interior points in (0, 1) where f is not smooth."""
        if self.kind == "kink":
            t = self.params[0]
            return (t,) if 0 < t < 1 else ()
        if self.kind == "table":
            return tuple(x for x in self.params[0] if 0 < x < 1)
        return ()

    def _eval(self, x: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "entropy":
            return entr(x)
        if k == "power":
            return x ** self.params[0]
        if k == "kink":
            return np.minimum(x, self.params[0])
        if k == "affine":
            a, b = self.params
            return a * x + b
        xs, ys = self.params
        return np.interp(x, xs, ys)

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.size and (arr.min() < -DOMAIN_TOL or arr.max() > 1 + DOMAIN_TOL):
            raise ValueError(f"{self.label}: argument outside [0, 1] "
                             f"(range {arr.min():.3e} .. {arr.max():.3e})")
        out = self._eval(np.clip(arr, 0.0, 1.0))
        return float(out) if np.ndim(x) == 0 else out

    def trace(self, s: SpectrumSequence) -> float:
        """sum_j f(s_j)."""
        return float(np.sum(self(s.values)))


BUILTIN_FUNCTIONS = (ConcaveFn.entropy(), ConcaveFn.power(0.5), ConcaveFn.kink(0.3))


def karamata_gap(x: SpectrumSequence, y: SpectrumSequence, f: ConcaveFn,
                 tol: Optional[float] = None) -> float:
    """sum f(y_j) - sum f(x_j); non-negative whenever x majorizes y and f is concave."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch {len(x)} vs {len(y)}")
    if tol is None:
        tol = default_tol(x.total)
    if abs(x.total - y.total) > tol:
        raise ValueError(f"totals differ by {x.total - y.total:.3e}")
    return f.trace(y) - f.trace(x)
