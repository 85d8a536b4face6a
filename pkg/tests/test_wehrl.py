import math

import numpy as np
import pytest
from scipy.special import beta, digamma

from sunwehrl.channels import (
    HermitianOperator,
    cloning_apply,
    coherent_output_spectrum,
    random_density,
)
from sunwehrl.fock import coherent_vector, dimension, enumerate_basis
from sunwehrl.majorization import BUILTIN_FUNCTIONS, ConcaveFn, spectrum
from sunwehrl.rep import random_unitary, symmetric_power
from sunwehrl.seeding import resolve_seed, stream
from sunwehrl.wehrl import (
    MonteCarloEstimate,
    berezin_lieb_gap,
    coherent_wehrl_closed_form,
    husimi,
    resolution_residual,
    sample_haar_state,
    sample_haar_states,
    semiclassical_trace,
    symbol_integral_mc,
    wehrl_entropy,
    wehrl_gap,
    wehrl_integral_mc,
)

from conftest import unit

ENTROPY = ConcaveFn.entropy()
IDENTITY_FN = ConcaveFn.affine(1.0, 0.0)


def _coherent_rho(n, m, u):
    return HermitianOperator.projector(coherent_vector(enumerate_basis(n, m), u))


def _entropy_beta(n, m):
    # (N-1) int_0^1 -s^M ln(s^M) (1-s)^(N-2) ds = -(N-1) M d/da B(a, N-1) at a = M+1
    return -(n - 1) * m * beta(m + 1, n - 1) * (digamma(m + 1) - digamma(m + n))


class TestSeeding:
    def test_streams_are_reproducible_and_distinct(self):
        a = stream(7, "x", 3).standard_normal(4)
        np.testing.assert_array_equal(a, stream(7, "x", 3).standard_normal(4))
        assert not np.array_equal(a, stream(7, "y", 3).standard_normal(4))
        assert not np.array_equal(a, stream(7, "x", 4).standard_normal(4))
        assert not np.array_equal(a, stream(8, "x", 3).standard_normal(4))

    def test_resolve_seed(self, monkeypatch):
        monkeypatch.delenv("SUNWEHRL_SEED", raising=False)
        assert resolve_seed(None) == 0
        monkeypatch.setenv("SUNWEHRL_SEED", "42")
        assert resolve_seed(None) == 42
        assert resolve_seed(5) == 5

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            stream(-1, "x")


class TestSphere:
    def test_unit_norm(self, rng):
        us = sample_haar_states(3, 1000, rng)
        np.testing.assert_allclose(np.linalg.norm(us, axis=1), 1, atol=1e-12)
        assert abs(np.linalg.norm(sample_haar_state(4, rng)) - 1) <= 1e-12

    def test_prefix_property(self):
        short = sample_haar_states(3, 10, stream(1, "s"))
        long = sample_haar_states(3, 50, stream(1, "s"))
        np.testing.assert_array_equal(short, long[:10])

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_first_moment(self, n):
        x = np.abs(sample_haar_states(n, 100_000, stream(3, "moment"))[:, 0]) ** 2
        assert abs(x.mean() - 1 / n) <= 3 * x.std(ddof=1) / math.sqrt(x.size)

    @pytest.mark.parametrize("n,m", [(2, 1), (2, 3), (3, 2)])
    def test_overlap_moment(self, rng, n, m):
        v = unit(rng, n)
        est = wehrl_integral_mc(_coherent_rho(n, m, v), IDENTITY_FN, 100_000, seed=4)
        assert est.within(1 / dimension(n, m))


class TestHusimi:
    def test_coherent_peak(self, rng):
        v = unit(rng, 3)
        assert abs(husimi(_coherent_rho(3, 2, v), v) - 1) <= 1e-12

    def test_maximally_mixed(self, rng):
        space = enumerate_basis(3, 2)
        rho = HermitianOperator.maximally_mixed(space)
        for _ in range(5):
            assert abs(husimi(rho, unit(rng, 3)) - 1 / space.dim) <= 1e-14

    def test_overlap_power(self, rng):
        n, m = 3, 3
        u, v = unit(rng, n), unit(rng, n)
        assert abs(husimi(_coherent_rho(n, m, v), u) - abs(np.vdot(u, v)) ** (2 * m)) <= 1e-12

    def test_rejects_non_density(self, rng):
        space = enumerate_basis(2, 1)
        with pytest.raises(ValueError):
            husimi(HermitianOperator(space, np.eye(2)), [1, 0])
        with pytest.raises(ValueError):
            husimi(HermitianOperator.maximally_mixed(space), [1, 1])

    def test_integrates_to_inverse_dimension(self, rng):
        rho = random_density(enumerate_basis(3, 2), rng)
        assert wehrl_integral_mc(rho, IDENTITY_FN, 50_000, seed=9).within(1 / 6)


class TestMonteCarlo:
    def test_constant_is_exact(self, rng):
        est = wehrl_integral_mc(random_density(enumerate_basis(2, 2), rng),
                                ConcaveFn.const(0.7), 1000, seed=0)
        assert est.mean == 0.7 and est.stderr == 0

    def test_coherent_entropy(self):
        est = wehrl_integral_mc(_coherent_rho(2, 1, np.array([1, 0])), ENTROPY, 100_000, seed=1)
        assert est.within(0.25)

    def test_worker_count_does_not_change_result(self, rng):
        rho = random_density(enumerate_basis(3, 2), rng)
        a = wehrl_integral_mc(rho, ENTROPY, 20_000, seed=5, workers=1)
        b = wehrl_integral_mc(rho, ENTROPY, 20_000, seed=5, workers=4)
        assert a == b

    def test_sample_count_validated(self, rng):
        with pytest.raises(ValueError):
            wehrl_integral_mc(random_density(enumerate_basis(2, 1), rng), ENTROPY, 1, seed=0)

    def test_stderr_definition(self):
        rho = _coherent_rho(2, 2, np.array([1, 0]))
        est = symbol_integral_mc(rho, ENTROPY, 5000, seed=2)
        assert est.samples == 5000 and est.seed == 2
        assert 0 < est.stderr < 0.01

    @pytest.mark.parametrize("n,m", [(2, 2), (3, 2)])
    def test_invariance_under_group_action(self, rng, n, m):
        space = enumerate_basis(n, m)
        rho = random_density(space, rng)
        P = symmetric_power(space, random_unitary(n, rng))
        rotated = HermitianOperator(space, P @ rho.matrix @ P.conj().T, psd=True, unit_trace=True)
        a = wehrl_integral_mc(rho, ENTROPY, 50_000, seed=11)
        b = wehrl_integral_mc(rotated, ENTROPY, 50_000, seed=12)
        assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


class TestClosedForm:
    def test_n2_m1_entropy(self):
        assert abs(coherent_wehrl_closed_form(2, 1, ENTROPY) - 0.25) <= 1e-12

    @pytest.mark.parametrize("n,m", [(2, 1), (2, 5), (3, 2), (4, 3), (6, 7)])
    def test_entropy_matches_digamma(self, n, m):
        assert abs(coherent_wehrl_closed_form(n, m, ENTROPY) - _entropy_beta(n, m)) <= 1e-10

    @pytest.mark.parametrize("n,m", [(2, 3), (3, 2), (5, 4)])
    def test_linear_is_inverse_dimension(self, n, m):
        assert abs(coherent_wehrl_closed_form(n, m, IDENTITY_FN) - 1 / dimension(n, m)) <= 1e-12

    @pytest.mark.parametrize("n,m,p", [(2, 2, 0.5), (3, 3, 0.25), (4, 1, 0.7)])
    def test_power_matches_beta(self, n, m, p):
        expected = (n - 1) * beta(m * p + 1, n - 1)
        assert abs(coherent_wehrl_closed_form(n, m, ConcaveFn.power(p)) - expected) <= 1e-10

    @pytest.mark.parametrize("n,m", [(2, 2), (3, 3)])
    def test_kink_matches_piecewise_integral(self, n, m):
        # min(s^M, t): s^M below t^(1/M), t above
        t = 0.3
        c = t ** (1 / m)
        s = np.linspace(0, c, 200_001)
        lower = np.trapezoid(s ** m * (1 - s) ** (n - 2), s)
        upper = t * (1 - c) ** (n - 1) / (n - 1)
        expected = (n - 1) * (lower + upper)
        assert abs(coherent_wehrl_closed_form(n, m, ConcaveFn.kink(t)) - expected) <= 1e-9

    def test_constant(self):
        assert abs(coherent_wehrl_closed_form(3, 2, ConcaveFn.const(1.5)) - 1.5) <= 1e-12

    def test_degenerate(self):
        assert coherent_wehrl_closed_form(1, 4, ENTROPY) == 0.0
        assert coherent_wehrl_closed_form(3, 0, ConcaveFn.power(0.5)) == 1.0

    def test_agrees_with_sampling(self, rng):
        u = unit(rng, 3)
        for f in BUILTIN_FUNCTIONS:
            est = wehrl_integral_mc(_coherent_rho(3, 2, u), f, 50_000, seed=13)
            assert est.within(coherent_wehrl_closed_form(3, 2, f))


class TestSemiclassical:
    def test_k0(self):
        d = dimension(3, 2)
        f = ConcaveFn.power(0.5)
        assert math.isclose(semiclassical_trace(3, 2, 0, f), (f(1) + (d - 1) * f(0)) / d)

    def test_n2_m1_k1(self):
        # T^1 of the coherent projector has spectrum {2, 1, 0}; the 1/2 scaling gives {1, 1/2, 0}
        expected = (ENTROPY(1.0) + ENTROPY(0.5) + ENTROPY(0.0)) / 3
        assert abs(semiclassical_trace(2, 1, 1, ENTROPY) - expected) <= 1e-14
        assert round(expected, 5) == 0.11552

    @pytest.mark.parametrize("n,m,k", [(2, 1, 3), (3, 2, 2), (4, 1, 3), (3, 3, 1)])
    def test_matches_full_spectrum(self, n, m, k):
        spec = coherent_output_spectrum(n, m, k).scaled(1 / math.perm(m + k, k))
        for f in BUILTIN_FUNCTIONS + (ConcaveFn.affine(-1.0, 2.0),):
            expected = f.trace(spec) / len(spec)
            assert abs(semiclassical_trace(n, m, k, f) - expected) <= 1e-10

    def test_matches_numerical_cloning(self, rng):
        n, m, k = 3, 2, 2
        rho = _coherent_rho(n, m, unit(rng, n))
        out = spectrum(cloning_apply(rho, k)).scaled(1 / math.perm(m + k, k))
        assert abs(semiclassical_trace(n, m, k, ENTROPY) - ENTROPY.trace(out) / len(out)) <= 1e-10

    def test_approaches_limit(self):
        assert abs(semiclassical_trace(2, 1, 200, ENTROPY) - 0.25) <= 0.01

    def test_gap_shrinks(self):
        limit = coherent_wehrl_closed_form(2, 1, ENTROPY)
        gaps = [abs(semiclassical_trace(2, 1, 2 ** j, ENTROPY) - limit) for j in range(10)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_large_k_uses_log_gamma(self):
        limit = coherent_wehrl_closed_form(3, 20, ENTROPY)
        val = semiclassical_trace(3, 20, 4000, ENTROPY)
        assert math.isfinite(val) and abs(val - limit) < 0.05


class TestBerezinLieb:
    def test_maximally_mixed_example(self):
        gamma = HermitianOperator.maximally_mixed(enumerate_basis(2, 1))
        r = berezin_lieb_gap(gamma, 1, ENTROPY, 1000, seed=0)
        assert abs(r.rhs.mean - math.log(2) / 2) <= 1e-12
        assert r.lhs <= r.rhs.mean + 1e-12

    def test_coherent_matches_semiclassical(self, rng):
        n, m, k = 3, 2, 2
        r = berezin_lieb_gap(_coherent_rho(n, m, unit(rng, n)), k, ENTROPY, 20_000, seed=1)
        assert abs(r.lhs - semiclassical_trace(n, m, k, ENTROPY)) <= 1e-10
        assert semiclassical_trace(n, m, k, ENTROPY) <= coherent_wehrl_closed_form(n, m, ENTROPY)

    def test_affine_is_tight(self, rng):
        f = ConcaveFn.affine(0.8, 0.1)
        gamma = random_density(enumerate_basis(3, 2), rng).scaled(1.7)
        r = berezin_lieb_gap(gamma, 2, f, 50_000, seed=2)
        assert r.rhs.within(r.lhs)

    @pytest.mark.slow
    def test_random_gammas(self, rng):
        grid = [(n, m, k) for n in (2, 3) for m in (1, 2, 3) for k in (1, 2, 3)]
        for trial in range(100):
            n, m, k = grid[trial % len(grid)]
            gamma = random_density(enumerate_basis(n, m), rng).scaled(rng.uniform(0.2, 1.0))
            for f in BUILTIN_FUNCTIONS:
                assert berezin_lieb_gap(gamma, k, f, 4000, seed=trial).holds()

    def test_requires_psd(self):
        with pytest.raises(ValueError):
            berezin_lieb_gap(HermitianOperator(enumerate_basis(2, 1), np.eye(2)), 1, ENTROPY, 100, 0)


class TestResolution:
    def test_level_zero(self):
        assert resolution_residual(3, 0, 100, seed=0) == 0.0

    def test_n2_m1(self):
        assert resolution_residual(2, 1, 100_000, seed=0) <= 0.05

    def test_more_samples_help_on_average(self):
        small = np.mean([resolution_residual(2, 2, 500, seed=s) for s in range(20)])
        large = np.mean([resolution_residual(2, 2, 8000, seed=s) for s in range(20)])
        assert large < small / 2

    def test_rejects_few_samples(self):
        with pytest.raises(ValueError):
            resolution_residual(2, 1, 5, seed=0)


class TestWehrlGap:
    def test_maximally_mixed_exact(self):
        rho = HermitianOperator.maximally_mixed(enumerate_basis(2, 1))
        gap = wehrl_gap(rho, ENTROPY)
        assert abs(gap.mean - (math.log(2) / 2 - 0.25)) <= 1e-12
        assert gap.stderr == 0

    def test_coherent_zero(self, rng):
        gap = wehrl_gap(_coherent_rho(3, 2, unit(rng, 3)), ConcaveFn.power(0.5))
        assert abs(gap.mean) <= 1e-12

    def test_coherent_by_sampling(self, rng):
        gap = wehrl_gap(_coherent_rho(2, 2, unit(rng, 2)), ENTROPY, method="mc",
                        samples=50_000, seed=3)
        assert abs(gap.mean) <= 3 * gap.stderr

    @pytest.mark.parametrize("n,m", [(2, 2), (3, 1)])
    def test_random_states_non_negative(self, rng, n, m):
        for trial in range(5):
            rho = random_density(enumerate_basis(n, m), rng)
            for f in BUILTIN_FUNCTIONS:
                gap = wehrl_gap(rho, f, samples=20_000, seed=trial)
                assert gap.mean >= -3 * gap.stderr

    def test_methods(self, rng):
        rho = random_density(enumerate_basis(2, 2), rng)
        with pytest.raises(ValueError):
            wehrl_entropy(rho, ENTROPY, method="closed_form")
        with pytest.raises(ValueError):
            wehrl_entropy(rho, ENTROPY, method="simpson")
        est = wehrl_entropy(rho, ENTROPY, method="auto", samples=2000)
        assert est.samples == 2000

    def test_exact_estimate(self):
        e = MonteCarloEstimate.exact(0.5)
        assert e.within(0.5) and not e.within(0.5 + 1e-15)
