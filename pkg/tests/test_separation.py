import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loccsep.errors import InfeasibleSeparationError, PreconditionError, UndefinedTaskError
from loccsep.qcore import (
    PureState,
    apply,
    canonical_pair,
    gauge_align,
    overlap,
    random_state,
    random_state_with_overlap,
    same_up_to_phase,
)
from loccsep.separation import (
    SeparationTask,
    build_discrimination_channel,
    build_separation_channel,
    check_chain_inequalities,
    eta_discrimination,
    eta_global_cloning,
    eta_global_product_separation,
    eta_global_separation,
    eta_locc_cloning,
    eta_locc_separation,
    eta_locc_upper_bound,
    eta_separation_upper_bound,
    gram_matrix,
)

unit = st.floats(0.0, 0.99)
prior = st.floats(0.0, 1.0)


def ordered(a, b):
    return max(a, b), min(a, b)


def task_from_overlaps(mu, mu_prime, seed=0, d_src=3, d_tgt=4):
    phi = random_state(d_src, [seed, 0])
    psi = random_state_with_overlap(d_src, phi, mu, [seed, 1])
    tphi = random_state(d_tgt, [seed, 2])
    tpsi = random_state_with_overlap(d_tgt, tphi, mu_prime, [seed, 3])
    return SeparationTask(phi, psi, tphi, tpsi)


def born_success(channel, task):
    w_phi = apply(channel.success, task.source_phi).weight
    w_psi = apply(channel.success, task.source_psi).weight
    return task.prior_phi * w_phi + task.prior_psi * w_psi


# exact rational reference values
def frac_locc(mu, nu, mp, np_):
    return 1 - mu * nu + (1 - mu) * (1 - nu) / ((1 - mp) * (1 - np_)) * mp * np_


class TestGlobalSeparation:
    def test_identity_separation(self):
        assert eta_global_separation(0.5, 0.5) == 1.0

    def test_discrimination_limit(self):
        assert eta_global_separation(0.5, 0.0) == 0.5
        ch = build_separation_channel(task_from_overlaps(0.5, 0.0))
        assert ch.success_prob_phi == pytest.approx(0.5, abs=1e-12)

    def test_two_thirds(self):
        assert eta_global_separation(0.5, 0.25) == pytest.approx(float(Fraction(2, 3)), abs=1e-15)
        task = task_from_overlaps(0.5, 0.25)
        assert born_success(build_separation_channel(task), task) == pytest.approx(2 / 3, abs=1e-12)

    def test_identical_states_rejected(self):
        with pytest.raises(UndefinedTaskError):
            eta_global_separation(1.0, 0.5)

    def test_infeasible_rejected(self):
        with pytest.raises(InfeasibleSeparationError):
            eta_global_separation(0.5, 0.6)

    @given(unit, unit, unit)
    def test_monotone(self, a, b, c):
        mu, mp = ordered(a, b)
        # nonincreasing in mu
        if c >= mu:
            assert eta_global_separation(c, mp) <= eta_global_separation(mu, mp) + 1e-15
        # nondecreasing in mu'
        if c <= mu:
            lo, hi = sorted((c, mp))
            assert eta_global_separation(mu, lo) <= eta_global_separation(mu, hi) + 1e-15


class TestSeparationBound:
    @given(unit, unit)
    def test_equal_priors_collapse(self, a, b):
        mu, mp = ordered(a, b)
        assert eta_separation_upper_bound(0.5, 0.5, mu, mp) == pytest.approx(
            eta_global_separation(mu, mp), abs=1e-12
        )

    @given(prior, unit)
    def test_no_separation_needed(self, s, mu):
        assert eta_separation_upper_bound(s, 1 - s, mu, mu) == 1.0

    def test_arithmetic_example(self):
        # 1 - 2*sqrt(0.09)*(0.25/0.75) = 1 - 0.6/3
        assert eta_separation_upper_bound(0.9, 0.1, 0.5, 0.25) == pytest.approx(0.8, abs=1e-12)

    def test_priors_must_sum_to_one(self):
        with pytest.raises(PreconditionError):
            eta_separation_upper_bound(0.6, 0.6, 0.5, 0.25)


class TestCloningAndDiscrimination:
    def test_orthogonal_clones_perfectly(self):
        assert eta_global_cloning(0.0, 0.7, 1, 3) == 1.0
        assert eta_discrimination(0.0, 0.7, 2) == 1.0

    def test_cloning_value(self):
        expected = (1 - Fraction(1, 4)) / (1 - Fraction(1, 16))
        assert expected == Fraction(4, 5)
        assert eta_global_cloning(0.5, 0.5, 1, 2) == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("m,expected", [(1, 0.75), (2, 0.9375)])
    def test_discrimination_values(self, m, expected):
        assert eta_discrimination(0.5, 0.5, m) == expected

    def test_copies_ordering(self):
        with pytest.raises(PreconditionError):
            eta_global_cloning(0.5, 0.5, 2, 2)

    @given(unit, unit, st.integers(1, 5))
    def test_limit_large_n(self, mu, nu, m):
        if mu * nu > 0.9:
            return
        assert abs(eta_global_cloning(mu, nu, m, 200) - eta_discrimination(mu, nu, m)) < 1e-9

    def test_cloning_is_separation_of_copies(self):
        # m -> n cloning separates overlap x^m into x^n
        x = 0.6 * 0.7
        assert eta_global_cloning(0.6, 0.7, 2, 5) == pytest.approx(eta_global_separation(x**2, x**5), abs=1e-14)


class TestLocc:
    def test_discrimination_targets(self):
        assert eta_locc_separation(0.4, 0.7, 0.0, 0.0) == pytest.approx(1 - 0.28, abs=1e-15)

    def test_seven_ninths(self):
        q = Fraction(1, 2), Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)
        assert frac_locc(*q) == Fraction(7, 9)
        assert eta_locc_separation(0.5, 0.5, 0.25, 0.25) == pytest.approx(7 / 9, abs=1e-15)
        assert 7 / 9 < eta_global_product_separation(0.5, 0.5, 0.25, 0.25) == pytest.approx(0.8)

    def test_strictly_below_global_on_grid(self):
        grid = np.linspace(0.01, 0.99, 10)
        worst = math.inf
        for mu in grid:
            for nu in grid:
                for mp in grid[grid < mu]:
                    for np_ in grid[grid < nu]:
                        gap = eta_global_product_separation(mu, nu, mp, np_) - eta_locc_separation(mu, nu, mp, np_)
                        worst = min(worst, gap)
        assert worst > 0

    def test_cloning_substitution(self):
        assert eta_locc_cloning(0.5, 0.5, 1, 2) == pytest.approx(7 / 9, abs=1e-15)

    @pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
    def test_cloning_orthogonal_side(self, eps):
        assert eta_locc_cloning(eps, 0.6, 1, 3) == pytest.approx(1.0, abs=2 * eps)

    def test_cloning_below_global_on_grid(self):
        # strictness in exact arithmetic; the float gap can drop below resolution
        for i in range(1, 20, 2):
            for j in range(1, 20, 2):
                mu, nu = Fraction(i, 20), Fraction(j, 20)
                for m, n in [(1, 2), (1, 3), (2, 3), (2, 7)]:
                    glob = (1 - (mu * nu) ** m) / (1 - (mu * nu) ** n)
                    locc = frac_locc(mu**m, nu**m, mu**n, nu**n)
                    assert locc < glob
                    f_locc = eta_locc_cloning(float(mu), float(nu), m, n)
                    assert f_locc == pytest.approx(float(locc), abs=1e-14)
                    assert f_locc <= eta_global_cloning(float(mu), float(nu), m, n) + 1e-15

    @given(unit, unit, unit, unit)
    def test_bound_at_equal_priors(self, a, b, c, d):
        mu, mp = ordered(a, b)
        nu, np_ = ordered(c, d)
        assert eta_locc_upper_bound(0.5, 0.5, mu, nu, mp, np_) == pytest.approx(
            eta_locc_separation(mu, nu, mp, np_), abs=1e-12
        )

    @given(unit, unit, unit)
    def test_bound_vacuous_for_certain_prior(self, a, b, c):
        mu, mp = ordered(a, b)
        assert eta_locc_upper_bound(1.0, 0.0, mu, c, mp, c) == 1.0

    def test_bound_one_round_identity(self):
        # nu == nu': the LOCC bound is 1 - nu * (1 - separation bound), hence looser
        rng = np.random.default_rng(4)
        for _ in range(100):
            s = rng.random()
            mu, mp = ordered(*rng.uniform(0, 0.99, 2))
            nu = rng.uniform(0, 0.99)
            locc = eta_locc_upper_bound(s, 1 - s, mu, nu, mp, nu)
            sep = eta_separation_upper_bound(s, 1 - s, mu, mp)
            assert locc == pytest.approx(1 - nu * (1 - sep), abs=1e-12)
            assert locc >= sep - 1e-12

    def test_dominance_equality_cases(self):
        assert eta_locc_separation(0.3, 0.6, 0.3, 0.6) == pytest.approx(
            eta_global_product_separation(0.3, 0.6, 0.3, 0.6), abs=1e-15
        )
        assert eta_locc_separation(0.3, 0.6, 0.0, 0.2) == pytest.approx(
            eta_global_product_separation(0.3, 0.6, 0.0, 0.2), abs=1e-15
        )


class TestChannelConstruction:
    def test_no_separation_is_isometry(self):
        task = task_from_overlaps(0.4, 0.4, seed=3)
        ch = build_separation_channel(task)
        assert ch.success_prob_phi == pytest.approx(1.0, abs=1e-14)
        assert apply(ch.failure, task.source_phi).weight <= 1e-14
        for src, tgt in [(task.source_phi, task.target_phi), (task.source_psi, task.target_psi)]:
            w, out = apply(ch.success, src)
            assert w == pytest.approx(1.0, abs=1e-12)
            assert same_up_to_phase(out, tgt)

    def test_success_maps_to_targets(self):
        task = task_from_overlaps(0.5, 0.25, seed=9)
        ch = build_separation_channel(task)
        for src, tgt in [(task.source_phi, task.target_phi), (task.source_psi, task.target_psi)]:
            w, out = apply(ch.success, src)
            assert w == pytest.approx(2 / 3, abs=1e-12)
            assert same_up_to_phase(out, tgt)

    def test_failure_states_coincide(self):
        task = task_from_overlaps(0.7, 0.1, seed=1)
        ch = build_separation_channel(task)
        _, f_phi = apply(ch.failure, task.source_phi)
        _, f_psi = apply(ch.failure, task.source_psi)
        assert overlap(f_phi, f_psi) == pytest.approx(1.0, abs=1e-12)

    def test_discrimination_limit_orthogonal_targets(self):
        task = SeparationTask(*canonical_pair(0.5), PureState.basis(2, 0), PureState.basis(2, 1))
        ch = build_separation_channel(task)
        assert apply(ch.success, task.source_phi).weight == pytest.approx(0.5, abs=1e-12)
        assert apply(ch.success, task.source_psi).weight == pytest.approx(0.5, abs=1e-12)

    def test_infeasible(self):
        phi, psi = canonical_pair(0.3)
        with pytest.raises(InfeasibleSeparationError):
            SeparationTask(phi, psi, *canonical_pair(0.5))

    def test_identical_sources(self):
        phi = random_state(3, 0)
        with pytest.raises(UndefinedTaskError):
            SeparationTask(phi, phi, *canonical_pair(0.2))

    @settings(max_examples=60)
    @given(st.integers(0, 10**6), unit, unit, st.integers(2, 8), st.integers(2, 8))
    def test_gram_preserved_by_dilation(self, seed, a, b, d_src, d_tgt):
        # stacking success over failure gives an isometry on the source span
        mu, mp = ordered(a, b)
        task = task_from_overlaps(mu, mp, seed, d_src, d_tgt)
        ch = build_separation_channel(task)
        phi, psi = gauge_align(task.source_phi, task.source_psi)
        dilation = np.vstack([ch.success.matrix, ch.failure.matrix])
        images = [PureState(dilation @ v.amplitudes) for v in (phi, psi)]
        np.testing.assert_allclose(gram_matrix(images), gram_matrix([phi, psi]), atol=1e-10)
        assert ch.instrument.completeness_residual() <= 1e-10
        assert ch.success_prob_phi == ch.success_prob_psi


class TestDiscriminationChannel:
    def test_orthogonal_is_perfect(self):
        inst = build_discrimination_channel(PureState.basis(3, 0), PureState.basis(3, 2))
        assert apply(inst["phi"], PureState.basis(3, 0)).weight == pytest.approx(1.0)
        assert apply(inst["psi"], PureState.basis(3, 2)).weight == pytest.approx(1.0)

    def test_half_overlap(self):
        phi, psi = canonical_pair(0.5)
        inst = build_discrimination_channel(phi, psi)
        assert apply(inst["phi"], phi).weight == pytest.approx(0.5, abs=1e-12)
        assert apply(inst["psi"], psi).weight == pytest.approx(0.5, abs=1e-12)

    def test_unambiguous_on_random_pairs(self):
        for k in range(100):
            d = 2 + k % 5
            phi, psi = random_state(d, [k, 0]), random_state(d, [k, 1])
            inst = build_discrimination_channel(phi, psi)
            mu = overlap(phi, psi)
            assert apply(inst["phi"], psi).weight < 1e-12
            assert apply(inst["psi"], phi).weight < 1e-12
            assert apply(inst["phi"], phi).weight == pytest.approx(1 - mu, abs=1e-10)
            assert inst.completeness_residual() <= 1e-10

    def test_identical_rejected(self):
        phi = random_state(2, 5)
        with pytest.raises(UndefinedTaskError):
            build_discrimination_channel(phi, PureState(1j * phi.amplitudes))


class TestChainInequalities:
    def test_equal_weights_edge(self):
        rep = check_chain_inequalities(0.3, 0.7, [(0.2, 0.2), (0.5, 0.5), (0.3, 0.3)], 0.4)
        assert rep.cauchy_sum == pytest.approx(1.0, abs=1e-15)
        assert rep.passed

    def test_disjoint_support(self):
        rep = check_chain_inequalities(0.5, 0.5, [(1.0, 0.0), (0.0, 1.0)], 0.2)
        assert rep.cauchy_sum == 0.0 and rep.passed

    def test_detects_violation(self):
        # weights not summing to one can break the sum bound
        rep = check_chain_inequalities(0.5, 0.5, [(1.0, 1.0), (1.0, 1.0)], 0.2)
        assert not rep.passed

    @settings(max_examples=300)
    @given(prior, st.integers(1, 6), st.integers(0, 10**6), st.floats(0, 1))
    def test_random_tuples(self, s, k, seed, mp):
        rng = np.random.default_rng(seed)
        si, ti = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        rep = check_chain_inequalities(s, 1 - s, list(zip(si, ti)), mp)
        assert rep.passed, rep
