"""Bradley-Terry fitting and signal-detection estimation."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import ndtri

from conceptdiff.analysis import (
    BTFit,
    PairwiseTally,
    choice_probability,
    fit_bradley_terry,
    normal_quantile,
    sdt_estimate,
    split_components,
)
from conceptdiff.errors import (
    DegenerateRateError,
    DisconnectedTallyError,
    QuasiSeparationError,
    UnknownItemError,
)


def three_way_tally(hve, hvr, evr):
    """Items (human, machine, random) with wins for each ordered pairing."""
    return PairwiseTally.from_pairs([
        ("human", "machine", hve[0], hve[1]),
        ("human", "random", hvr[0], hvr[1]),
        ("machine", "random", evr[0], evr[1]),
    ])


def oracle_fit(tally, reference, penalty=0.0):
    """Nelder-Mead likelihood maximization, independent of the Newton path."""
    ref = tally.index_of(reference)
    free = [i for i in range(len(tally.items)) if i != ref]
    wins = np.asarray(tally.wins, dtype=float)

    def neg(theta):
        lam = np.zeros(len(tally.items))
        lam[free] = theta
        diff = lam[:, None] - lam[None, :]
        ll = np.sum(wins * -np.logaddexp(0.0, -diff))
        return -(ll - 0.5 * penalty * float(np.dot(lam, lam)))

    res = minimize(neg, np.zeros(len(free)), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 50000,
                            "maxfev": 50000})
    lam = np.zeros(len(tally.items))
    lam[free] = res.x
    return lam


class TestBradleyTerry:
    def test_even_split_gives_zero_abilities(self):
        tally = PairwiseTally.from_pairs([("a", "b", 50, 50)])
        fit = fit_bradley_terry(tally, reference="b")
        assert fit.ability("a") == pytest.approx(0.0, abs=1e-8)
        assert fit.ability("b") == 0.0
        assert fit.converged

    def test_reference_pinned_at_zero(self):
        tally = three_way_tally((90, 6), (94, 2), (86, 10))
        fit = fit_bradley_terry(tally, reference="random")
        assert fit.ability("random") == 0.0

    def test_published_set1_gap_recovered(self):
        # regression target: published fit for this tally reports abilities
        # 4.58 (human) and 2.04 (machine), a gap of 2.54, reference random=0
        tally = three_way_tally((90, 6), (94, 2), (86, 10))
        fit = fit_bradley_terry(tally, reference="random")
        oracle = oracle_fit(tally, "random")
        assert fit.ability("human") == pytest.approx(oracle[0], abs=1e-3)
        assert fit.ability("machine") == pytest.approx(oracle[1], abs=1e-3)
        gap = fit.ability("human") - fit.ability("machine")
        assert abs(gap - 2.54) <= 0.5

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_likelihood_oracle_on_random_tallies(self, seed):
        rng = np.random.default_rng(seed)
        counts = rng.integers(1, 80, size=6)
        tally = three_way_tally(
            (counts[0], counts[1]), (counts[2], counts[3]), (counts[4], counts[5])
        )
        fit = fit_bradley_terry(tally, reference="random")
        oracle = oracle_fit(tally, "random")
        for idx, item in enumerate(tally.items):
            assert fit.ability(item) == pytest.approx(oracle[idx], abs=1e-3)

    def test_score_norm_below_tol_at_convergence(self):
        tally = three_way_tally((90, 6), (94, 2), (86, 10))
        tol = 1e-8
        fit = fit_bradley_terry(tally, reference="random", tol=tol)
        wins = np.asarray(tally.wins, dtype=float)
        lam = fit.abilities
        n_pair = wins + wins.T
        p = 1.0 / (1.0 + np.exp(-(lam[:, None] - lam[None, :])))
        grad = wins.sum(axis=1) - (n_pair * p).sum(axis=1)
        free = [i for i, item in enumerate(tally.items) if item != "random"]
        assert float(np.max(np.abs(grad[free]))) < tol

    def test_disconnected_graph_lists_isolated_items(self):
        tally = PairwiseTally.from_pairs([
            ("a", "b", 5, 5), ("c", "d", 4, 6),
        ])
        with pytest.raises(DisconnectedTallyError) as err:
            fit_bradley_terry(tally, reference="a")
        assert set(err.value.isolated) == {"c", "d"}

    def test_full_separation_demands_penalty(self):
        tally = PairwiseTally.from_pairs([("a", "b", 5, 0)])
        with pytest.raises(QuasiSeparationError, match="penalty"):
            fit_bradley_terry(tally, reference="b")
        fit = fit_bradley_terry(tally, reference="b", penalty=0.01)
        assert fit.converged
        assert fit.ability("a") > 0

    def test_zero_cell_with_finite_mle_still_fits(self):
        # machine never lost to random, but the loss cycle through human
        # keeps the maximum finite (wins: h>e 76-20, h>r 95-1, e>r 96-0)
        tally = three_way_tally((76, 20), (95, 1), (96, 0))
        fit = fit_bradley_terry(tally, reference="random")
        oracle = oracle_fit(tally, "random")
        assert fit.ability("human") == pytest.approx(oracle[0], abs=1e-3)
        assert fit.ability("machine") == pytest.approx(oracle[1], abs=1e-3)

    def test_gauge_invariance_of_choice_probabilities(self):
        tally = three_way_tally((60, 40), (70, 30), (55, 45))
        fit = fit_bradley_terry(tally, reference="random")
        shifted = BTFit(
            items=fit.items, abilities=fit.abilities + 3.7,
            reference=fit.reference, converged=fit.converged,
            loglik=fit.loglik, n_iter=fit.n_iter,
        )
        for a in fit.items:
            for b in fit.items:
                if a != b:
                    assert choice_probability(fit, a, b) == pytest.approx(
                        choice_probability(shifted, a, b), abs=1e-12
                    )

    def test_order_consistency(self):
        # a beats b head to head and both beat the reference consistently
        tally = three_way_tally((70, 30), (80, 20), (65, 35))
        fit = fit_bradley_terry(tally, reference="random")
        assert fit.ability("human") > fit.ability("machine") > 0

    def test_choice_probability_closed_forms(self):
        fit = BTFit(items=("a", "b"), abilities=np.array([math.log(9.0), 0.0]),
                    reference="b", converged=True, loglik=0.0, n_iter=0)
        assert choice_probability(fit, "a", "b") == pytest.approx(0.9, abs=1e-12)
        equal = BTFit(items=("a", "b"), abilities=np.zeros(2), reference="b",
                      converged=True, loglik=0.0, n_iter=0)
        assert choice_probability(equal, "a", "b") == 0.5
        with pytest.raises(UnknownItemError):
            choice_probability(fit, "a", "zz")

    def test_fitted_probabilities_track_win_fractions(self):
        tally = three_way_tally((90, 6), (94, 2), (86, 10))
        fit = fit_bradley_terry(tally, reference="random")
        pairs = [("human", "machine", 90, 96), ("human", "random", 94, 96),
                 ("machine", "random", 86, 96)]
        for a, b, w, n in pairs:
            model = choice_probability(fit, a, b)
            empirical = w / n
            print(f"{a} over {b}: model={model:.4f} empirical={empirical:.4f}")
            assert math.isfinite(model)

    def test_tally_validation(self):
        with pytest.raises(ValueError):
            PairwiseTally(items=("a", "b"), wins=np.array([[0, -1], [2, 0]]))
        with pytest.raises(ValueError):
            PairwiseTally(items=("a", "a"), wins=np.zeros((2, 2), dtype=int))
        with pytest.raises(ValueError):
            PairwiseTally.from_pairs([("a", "a", 1, 2)])

    def test_split_components(self):
        rows = [("a", "b", 1, 2), ("c", "d", 3, 4), ("b", "e", 5, 6)]
        comps = split_components(rows)
        assert len(comps) == 2
        assert comps[0] == [("a", "b", 1, 2), ("b", "e", 5, 6)]
        assert comps[1] == [("c", "d", 3, 4)]


class TestNormalQuantile:
    def test_matches_high_precision_oracle_on_grid(self):
        grid = np.linspace(1e-6, 1.0 - 1e-6, 1000)
        for p in grid:
            assert abs(normal_quantile(float(p)) - ndtri(p)) < 1e-10

    def test_spot_values_against_mpmath(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for p in (1e-9, 1e-4, 0.025, 0.31, 0.5, 0.69, 0.975, 1 - 1e-4):
            exact = float(mp.sqrt(2) * mp.erfinv(mp.mpf(2) * mp.mpf(p) - 1))
            assert abs(normal_quantile(p) - exact) < 1e-9, p

    def test_symmetry(self):
        for p in (0.01, 0.2, 0.31, 0.45):
            assert normal_quantile(1 - p) == pytest.approx(-normal_quantile(p), abs=1e-14)

    def test_domain(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                normal_quantile(p)


class TestSDT:
    def test_equal_rates_give_zero_dprime(self):
        est = sdt_estimate(50, 50, 50, 50, correction="none")
        assert est.d_prime == 0.0

    def test_069_vs_031(self):
        # H = 0.69 and F = 0.31 without correction: d' = 2 z(0.69) ~ 0.992, c = 0
        est = sdt_estimate(69, 31, 31, 69, correction="none")
        oracle = float(ndtri(0.69) - ndtri(0.31))
        assert est.d_prime == pytest.approx(oracle, abs=1e-12)
        assert abs(est.d_prime - 0.992) <= 1e-3
        assert est.c == pytest.approx(0.0, abs=1e-12)

    def test_antisymmetry(self):
        a = sdt_estimate(40, 10, 20, 30)
        b = sdt_estimate(20, 30, 40, 10)
        assert a.d_prime == pytest.approx(-b.d_prime, abs=1e-14)

    def test_bias_sign_tracks_rate_sum(self):
        for h, m, f, c in ((80, 20, 40, 60), (20, 80, 10, 90), (60, 40, 41, 59)):
            est = sdt_estimate(h, m, f, c, correction="none")
            rate_sum = h / (h + m) + f / (f + c)
            if rate_sum > 1:
                assert est.c < 0
            elif rate_sum < 1:
                assert est.c > 0

    def test_loglinear_correction_values(self):
        est = sdt_estimate(9, 1, 0, 9)
        h = (9 + 0.5) / (10 + 1)
        f = 0.5 / 10
        assert est.d_prime == pytest.approx(float(ndtri(h) - ndtri(f)), abs=1e-12)
        assert est.corrected

    def test_degenerate_rate_without_correction(self):
        with pytest.raises(DegenerateRateError):
            sdt_estimate(10, 0, 3, 7, correction="none")

    def test_validation(self):
        with pytest.raises(ValueError):
            sdt_estimate(0, 0, 1, 1)
        with pytest.raises(ValueError):
            sdt_estimate(1, 1, 1, -1)
        with pytest.raises(ValueError):
            sdt_estimate(1, 1, 1, 1, correction="magic")
