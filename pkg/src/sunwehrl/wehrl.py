"""Husimi functions, sphere integrals and Wehrl-type entropies on H_M.

All group integrals are taken over the unit sphere of C^N with its
normalized measure; a Haar-random unitary applied to a fixed vector gives
the same distribution, so integrating over SU(N) is never needed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .channels import HermitianOperator, cloning_apply, coherence_defect
from .errors import QuadratureError
from .fock import INT64_MAX, StateVector, _space, coherent_vectors
from .majorization import ConcaveFn, spectrum
from .seeding import stream

BLOCK = 4096
HUSIMI_TOL = 1e-12
QUAD_TOL = 1e-10
SPHERE_LABEL = "sphere"


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * self.stderr

    @classmethod
    def exact(cls, value: float) -> "MonteCarloEstimate":
        return cls(float(value), 0.0, 0, -1)


def sample_haar_states(n_modes: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform unit vectors in C^N, shape (count, N).

    Real and imaginary parts come from one (count, 2N) draw, so a shorter
    request from the same stream is a prefix of a longer one.
    """
    x = rng.standard_normal((count, 2 * n_modes))
    z = x[:, :n_modes] + 1j * x[:, n_modes:]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_haar_state(n_modes: int, rng: np.random.Generator) -> np.ndarray:
    return sample_haar_states(n_modes, 1, rng)[0]


def _sphere_map(fn: Callable[[np.ndarray], np.ndarray], n_modes: int, samples: int,
                seed: int, label: str = SPHERE_LABEL, workers: int = 1) -> list:
    """Apply ``fn`` to fixed-size blocks of sphere samples, results in block order.

    Block b always draws from stream (seed, label, b); the worker count only
    changes scheduling.
    """
    def run(block):
        b, size = block
        return fn(sample_haar_states(n_modes, size, stream(seed, label, b)))

    blocks = [(b, min(BLOCK, samples - start))
              for b, start in enumerate(range(0, samples, BLOCK))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, blocks))
    return [run(b) for b in blocks]


def lower_symbol(gamma: HermitianOperator, us: np.ndarray) -> np.ndarray:
    """<coherent(u)| gamma |coherent(u)> for each row u of ``us``."""
    C = coherent_vectors(gamma.space, us)
    return np.einsum("sp,sp->s", C.conj() @ gamma.matrix, C).real


def _require_density(rho: HermitianOperator):
    if not (rho.psd and rho.unit_trace):
        raise ValueError("expected a density matrix (flags psd and unit_trace)")
    rho.check()


def _clamp_unit(values: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo < -HUSIMI_TOL or hi > 1 + HUSIMI_TOL:
        raise ValueError(f"Husimi values outside [0, 1]: range {lo:.3e} .. {hi:.3e}")
    return np.clip(values, 0.0, 1.0)


def husimi(rho: HermitianOperator, u) -> float:
    """<coherent(u)| rho |coherent(u)>, clamped to [0, 1]."""
    _require_density(rho)
    u = np.asarray(u, dtype=complex)
    if u.shape != (rho.space.n_modes,) or abs(np.linalg.norm(u) - 1) > HUSIMI_TOL:
        raise ValueError("u must be a unit vector in C^N")
    return float(_clamp_unit(lower_symbol(rho, u[None, :]))[0])


def _estimate(values: np.ndarray, seed: int) -> MonteCarloEstimate:
    n = values.size
    # fsum keeps the mean correctly rounded, so a constant integrand averages to itself
    return MonteCarloEstimate(math.fsum(values) / n,
                              float(np.std(values, ddof=1) / math.sqrt(n)), n, seed)


def _is_constant(f: ConcaveFn) -> bool:
    return f.kind == "affine" and f.params[0] == 0.0


def symbol_integral_mc(gamma: HermitianOperator, f: ConcaveFn, samples: int, seed: int,
                       workers: int = 1) -> MonteCarloEstimate:
    """MC estimate of the sphere average of f(<coherent(u)|gamma|coherent(u)>)."""
    if samples <= 1:
        raise ValueError("need at least 2 samples")
    if _is_constant(f):
        return MonteCarloEstimate(f.params[1], 0.0, samples, seed)
    parts = _sphere_map(lambda us: f(_clamp_unit(lower_symbol(gamma, us))),
                        gamma.space.n_modes, samples, seed, workers=workers)
    return _estimate(np.concatenate(parts), seed)


def wehrl_integral_mc(rho: HermitianOperator, f: ConcaveFn, samples: int, seed: int,
                      workers: int = 1) -> MonteCarloEstimate:
    """Wehrl-type entropy S_f(rho): the sphere average of f(Husimi(rho, u))."""
    _require_density(rho)
    return symbol_integral_mc(rho, f, samples, seed, workers)


def _pieces(f: ConcaveFn, level: int) -> list[float]:
    # f(s**M) is non-smooth where s**M hits a breakpoint of f
    cuts = sorted({t ** (1.0 / level) for t in f.breakpoints}) if level else []
    return [0.0] + [c for c in cuts if 0 < c < 1] + [1.0]


def coherent_wehrl_closed_form(n_modes: int, level: int, f: ConcaveFn) -> float:
    """S_f of a coherent state: (N-1) * integral_0^1 f(s^M) (1-s)^(N-2) ds."""
    N, M = n_modes, level
    if N < 1 or M < 0:
        raise ValueError("need N >= 1, M >= 0")
    if N == 1 or M == 0:
        return float(f(1.0))
    g = lambda s: f(s ** M)
    edges = _pieces(f, M)
    total, err = 0.0, 0.0
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=500)
    for a, b in zip(edges[:-1], edges[1:]):
        if b == 1.0 and N >= 3:
            # QAWS: algebraic endpoint weight (1 - s)^(N-2) handled exactly
            val, e = quad(g, a, b, weight="alg", wvar=(0.0, float(N - 2)), **opts)
        else:
            val, e = quad(lambda s: g(s) * (1 - s) ** (N - 2), a, b, **opts)
        total += val
        err += e
    err *= N - 1
    if err > QUAD_TOL:
        raise QuadratureError(f"closed-form Wehrl integral for N={N}, M={M}, {f.label}", err)
    return (N - 1) * total


def _binom_ratio(n1: int, k1: int, n2: int, k2: int) -> float:
    """binomial(n1, k1) / binomial(n2, k2); exact integers inside 64 bits, log-gamma outside."""
    a, b = math.comb(n1, k1), math.comb(n2, k2)
    if a <= INT64_MAX and b <= INT64_MAX:
        return a / b
    la = math.lgamma(n1 + 1) - math.lgamma(k1 + 1) - math.lgamma(n1 - k1 + 1)
    lb = math.lgamma(n2 + 1) - math.lgamma(k2 + 1) - math.lgamma(n2 - k2 + 1)
    return math.exp(la - lb)


def _zero_weight(N: int, M: int, k: int) -> float:
    """(dim H_{M+k} - dim H_k) / dim H_{M+k}."""
    big, small = math.comb(M + k + N - 1, N - 1), math.comb(k + N - 1, N - 1)
    if big <= INT64_MAX:
        return (big - small) / big
    return -math.expm1(math.log(small) - math.log(big))


def semiclassical_trace(n_modes: int, level: int, k: int, f: ConcaveFn) -> float:
    """(1/dim H_{M+k}) Tr f((M!/(M+k)!) T^k(coherent projector)), zero eigenvalues included.

    Scaled eigenvalues are binomial(m, M)/binomial(M+k, M) for m = M..M+k with
    weights binomial(M+k-m+N-2, N-2)/dim H_{M+k}; the zero eigenvalue carries
    weight 1 - dim H_k / dim H_{M+k}.
    """
    N, M = n_modes, level
    if N < 1 or M < 0 or k < 0:
        raise ValueError("need N >= 1, M >= 0, k >= 0")
    if N == 1:
        return float(f(1.0))
    ms = range(M, M + k + 1)
    x = np.array([_binom_ratio(m, M, M + k, M) for m in ms])
    w = np.array([_binom_ratio(M + k - m + N - 2, N - 2, M + k + N - 1, N - 1) for m in ms])
    w0 = _zero_weight(N, M, k)
    out = float(np.sum(f(x) * w))
    if w0 > 0:
        out += float(f(0.0)) * w0
    return out


@dataclass(frozen=True)
class BerezinLieb:
    lhs: float
    rhs: MonteCarloEstimate

    def holds(self, n_sigma: float = 3.0, atol: float = 1e-12) -> bool:
        """lhs <= rhs within ``n_sigma`` standard errors plus ``atol`` of rounding slack.

        The slack matters when both sides are equal, e.g. when f is affine on
        the range of every eigenvalue and every Husimi value.
        """
        return self.lhs <= self.rhs.mean + n_sigma * self.rhs.stderr + atol


def berezin_lieb_gap(gamma: HermitianOperator, k: int, f: ConcaveFn, samples: int,
                     seed: int, workers: int = 1) -> BerezinLieb:
    """Both sides of the upper Berezin-Lieb bound for T^k.

    lhs = (1/dim H_{M+k}) Tr f((M!/(M+k)!) T^k(gamma)), rhs estimates the
    sphere average of f(<coherent(u)|gamma|coherent(u)>). For concave f,
    lhs <= rhs.
    """
    if not gamma.psd:
        raise ValueError("gamma must be positive semidefinite")
    M = gamma.space.level
    out = cloning_apply(gamma, k)
    scale = 1.0 / math.perm(M + k, k)
    lhs = f.trace(spectrum(out).scaled(scale)) / out.space.dim
    rhs = symbol_integral_mc(gamma, f, samples, seed, workers)
    return BerezinLieb(lhs, rhs)


def resolution_residual(n_modes: int, level: int, samples: int, seed: int,
                        workers: int = 1) -> float:
    """max |dim * avg_u |coherent(u)><coherent(u)| - I| over matrix entries."""
    if samples < 10:
        raise ValueError("need at least 10 samples")
    space = _space(n_modes, level)
    parts = _sphere_map(lambda us: (lambda C: C.T @ C.conj())(coherent_vectors(space, us)),
                        n_modes, samples, seed, label="resolution", workers=workers)
    avg = sum(parts) / samples
    return float(np.max(np.abs(space.dim * avg - np.eye(space.dim))))


def _pure_vector(rho: HermitianOperator, tol: float = 1e-10) -> Optional[StateVector]:
    w, v = np.linalg.eigh(rho.matrix)
    if w[-1] < 1 - tol:
        return None
    return StateVector(rho.space, v[:, -1])


def wehrl_exact(rho: HermitianOperator, f: ConcaveFn) -> Optional[float]:
    """S_f(rho) when it is known in closed form, else None.

    Covered: coherent projectors (one-dimensional integral) and the maximally
    mixed state, whose Husimi function is the constant 1/dim.
    """
    space = rho.space
    if np.max(np.abs(rho.matrix - np.eye(space.dim) / space.dim)) <= 1e-12:
        return float(f(1.0 / space.dim))
    psi = _pure_vector(rho)
    if psi is not None and (space.level == 0 or coherence_defect(psi) <= 1e-10):
        return coherent_wehrl_closed_form(space.n_modes, space.level, f)
    return None


def wehrl_entropy(rho: HermitianOperator, f: ConcaveFn, method: str = "auto",
                  samples: int = 100_000, seed: int = 0, workers: int = 1) -> MonteCarloEstimate:
    """S_f(rho) by closed form ("closed_form"), sampling ("mc"), or closed form when available."""
    _require_density(rho)
    method = method.replace("-", "_")
    if method not in ("auto", "closed_form", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "closed_form"):
        exact = wehrl_exact(rho, f)
        if exact is not None:
            return MonteCarloEstimate.exact(exact)
        if method == "closed_form":
            raise ValueError("no closed form for this state; use method='mc'")
    return wehrl_integral_mc(rho, f, samples, seed, workers)


def wehrl_gap(rho: HermitianOperator, f: ConcaveFn, method: str = "auto",
              samples: int = 100_000, seed: int = 0, workers: int = 1) -> MonteCarloEstimate:
    """S_f(rho) - S_f(coherent); non-negative up to sampling error."""
    s = wehrl_entropy(rho, f, method, samples, seed, workers)
    ref = coherent_wehrl_closed_form(rho.space.n_modes, rho.space.level, f)
    return MonteCarloEstimate(s.mean - ref, s.stderr, s.samples, s.seed)
