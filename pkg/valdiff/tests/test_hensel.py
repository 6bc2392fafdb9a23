import random
import time

import pytest
from fractions import Fraction
from unittest.mock import patch

from algebra.hensel import (
    CONFIG_LOST,
    ITERATION_CAP,
    ORACLE_UNSUPPORTED,
    ROOT_FOUND,
    config,
    hensax1_roundtrip,
    is_unit_derivative_configuration,
    refine_step,
    solve,
)
from algebra.ordgroup import GroupAut, ValueGroup, parse_matrix
from algebra.resfield import QField, RatShift
from algebra.series import HahnSeries, parse_series
from algebra.sigmapoly import SigmaPoly, parse_sigma_poly
from algebra.transseries import FlatField, Transseries
from utils.errors import RefinementStalled, ValdiffError

N = 10


# ---- classical Newton iteration on truncated power series in t ----

def ps_mul(a, b):
    out = [Fraction(0)] * N
    for i, x in enumerate(a):
        if x:
            for j in range(N - i):
                out[i + j] += x * b[j]
    return out


def ps_inv(a):
    inv = [Fraction(0)] * N
    inv[0] = 1 / a[0]
    for n in range(1, N):
        inv[n] = -sum((a[k] * inv[n - k] for k in range(1, n + 1)), Fraction(0)) / a[0]
    return inv


def newton_root(coeffs, r):
    """x ↦ x − f(x)/f'(x) from the residue root r, coefficients as t-power lists.

    The error squares each pass, so four passes reach t^16."""
    x = [Fraction(r)] + [Fraction(0)] * (N - 1)
    for _ in range(4):
        fx = [Fraction(0)] * N
        dfx = [Fraction(0)] * N
        power = [Fraction(1)] + [Fraction(0)] * (N - 1)
        for i, c in enumerate(coeffs):
            fx = [u + v for u, v in zip(fx, ps_mul(c, power))]
            if i + 1 < len(coeffs):
                dfx = [u + v for u, v in zip(dfx, [(i + 1) * w for w in ps_mul(coeffs[i + 1], power)])]
            power = ps_mul(power, x)
        x = [u - v for u, v in zip(x, ps_mul(fx, ps_inv(dfx)))]
    return x


def residue_product(roots):
    """Integer coefficients of Π (y − r), lowest degree first."""
    poly = [1]
    for r in roots:
        shifted = [0] + poly
        poly = [s - r * p for s, p in zip(shifted, poly + [0])]
    return poly


def random_monic(rng):
    degree = rng.randint(1, 4)
    r = rng.randint(-3, 3)
    others = rng.sample([v for v in range(-4, 5) if v != r], degree - 1)
    base = residue_product([r] + others)
    coeffs = []
    for i, c in enumerate(base):
        series = [Fraction(c)] + [Fraction(0)] * (N - 1)
        if i < degree:
            series[1] = Fraction(rng.randint(-2, 2))
            series[2] = Fraction(rng.randint(-1, 1))
        coeffs.append(series)
    return coeffs, r


class TestHenselExamples:
    """Tests for the refinement loop on small examples"""

    def test_square_root(self):
        """√(1+t) modulo t⁵ from the start 1."""
        group, fld = ValueGroup.rational(1), QField()
        prec = group.elem(5)
        G = parse_sigma_poly("s0(x)^2 - (1+t)", group, fld)
        report = solve(G, parse_series("1", group, fld), prec=prec)
        assert report.outcome == ROOT_FOUND
        assert not report.exact
        assert len(report.iterates) == 5
        expected = parse_series("1 + 1/2 t - 1/8 t^2 + 1/16 t^3 - 5/128 t^4", group, fld, prec)
        assert report.root == expected

    def test_config_witness(self):
        """(x² − 1 − t, 1) is in configuration with γ = 1 and witness x."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 - 1 - t", group, fld)
        a = parse_series("1", group, fld)
        cfg = config(G, a)
        assert cfg.gamma == group.elem(1)
        assert cfg.to_json()["witness"] == [1]
        assert is_unit_derivative_configuration(G, a)

    def test_exact_root_is_found_immediately(self):
        """A starting point that already solves G is returned as is."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 - t^2", group, fld)
        report = solve(G, parse_series("t", group, fld))
        assert report.outcome == ROOT_FOUND
        assert report.exact
        assert len(report.iterates) == 1

    def test_config_lost(self):
        """x² + 1 at 0 has G'(0) = 0 although G' ≠ 0."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 + 1", group, fld)
        report = solve(G, HahnSeries.zero(group, fld))
        assert report.outcome == CONFIG_LOST
        assert report.root is None

    def test_oracle_unsupported(self):
        """1 + x + σ(x) over ℚ needs an order-1 residue solver."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("1 + s0(x) + s1(x)", group, fld)
        report = solve(G, HahnSeries.zero(group, fld))
        assert report.outcome == ORACLE_UNSUPPORTED

    def test_iteration_cap(self):
        """Stopping after two steps is reported as such."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 - 1 - t", group, fld)
        report = solve(G, parse_series("1", group, fld), max_iter=2, prec=group.elem(8))
        assert report.outcome == ITERATION_CAP
        assert len(report.iterates) == 3
        assert report.to_json()["outcome"] == "iteration-cap"

    def test_multivariable_rejected(self):
        """Configurations are for one-variable σ-polynomials."""
        group, fld = ValueGroup.rational(1), QField()
        with pytest.raises(ValdiffError):
            config(parse_sigma_poly("x*y - t", group, fld), HahnSeries.zero(group, fld))

    def test_solve_logs_boundaries(self):
        """The solver logs its start and outcome."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 - 1 - t", group, fld)
        with patch("algebra.hensel.log_info") as mock_log:
            solve(G, parse_series("1", group, fld), prec=group.elem(3))
        messages = [call.args[0] for call in mock_log.call_args_list]
        assert any(m.startswith("[HENSEL_SOLVE] start") for m in messages)
        assert any("outcome=root-found" in m for m in messages)

    def test_stalled_refinement_is_config_lost(self):
        """A step that fails to raise v(G) ends the loop instead of escaping."""
        group, fld = ValueGroup.rational(1), QField()
        G = parse_sigma_poly("x^2 - 1 - t", group, fld)
        stalled = RefinementStalled("refinement did not increase v(G): 1 vs 1")
        with patch("algebra.hensel.refine_step", side_effect=stalled):
            report = solve(G, parse_series("1", group, fld), prec=group.elem(4))
        assert report.outcome == CONFIG_LOST
        assert report.message == "refinement did not increase v(G): 1 vs 1"
        assert report.root is None
        assert len(report.iterates) == 1


class TestClassicalEquivalence:
    """σ = id and ℚ residues: the loop reproduces classical Newton iteration"""

    def test_matches_newton_iteration(self):
        """20 random monic polynomials with a simple residue root agree term by term modulo t¹⁰."""
        start = time.perf_counter()
        rng = random.Random(23)
        group, fld = ValueGroup.rational(1), QField()
        checked = 0
        while checked < 20:
            coeffs, r = random_monic(rng)
            G = SigmaPoly.from_univariate([
                HahnSeries.make(group, fld, [(group.elem(k), c) for k, c in enumerate(series) if c])
                for series in coeffs
            ])
            a = HahnSeries.constant(group, fld, r)
            if not is_unit_derivative_configuration(G, a):
                continue
            report = solve(G, a, prec=group.elem(N))
            assert report.outcome == ROOT_FOUND
            expected = newton_root(coeffs, r)
            assert report.root == HahnSeries.make(
                group, fld, [(group.elem(k), c) for k, c in enumerate(expected)], group.elem(N)
            )
            checked += 1
        assert time.perf_counter() - start < 5


SIGMAS = ["1", "2", "[[1,0],[1,1]]"]


def random_positive(rng, group):
    if group.dim == 1:
        return group.elem(Fraction(rng.randint(1, 6), 2))
    first = rng.randint(0, 1)
    second = rng.randint(1, 3) if first == 0 else rng.randint(-2, 2)
    return group.elem(first, second)


def random_nonnegative(rng, group):
    if group.dim == 1:
        return group.elem(rng.randint(0, 2))
    return group.elem(rng.randint(0, 1), rng.randint(0, 2))


class TestRefineStepContract:
    """Each refinement step moves by γ(G,a), raises v(G) and raises γ"""

    def test_random_configurations(self):
        """50 configurations c·t^β + α₀x + α₁σ(x) + t^δ·x·σ(x) at 0 over ℚ(s)."""
        rng = random.Random(29)
        fld = RatShift()
        for n in range(50):
            group = ValueGroup(GroupAut(parse_matrix(SIGMAS[n % 3])))
            beta, delta = random_positive(rng, group), random_nonnegative(rng, group)
            c0, a0, a1 = (rng.choice([-3, -2, -1, 1, 2, 3]) for _ in range(3))
            G = SigmaPoly.make(group, fld, 1, 1, [
                ((0, 0), HahnSeries.monomial(group, fld, beta, c0)),
                ((1, 0), HahnSeries.constant(group, fld, a0)),
                ((0, 1), HahnSeries.constant(group, fld, a1)),
                ((1, 1), HahnSeries.monomial(group, fld, delta)),
            ])
            a = HahnSeries.zero(group, fld)
            cfg = config(G, a)
            assert cfg is not None
            b = refine_step(G, a, cfg)
            assert (b - a).valuation() == cfg.gamma
            assert G.eval(b).valuation() > G.eval(a).valuation()
            for j, poly in G.taylor_polys().items():
                if any(j):
                    assert poly.eval(b).valuation() == poly.eval(a).valuation()
            after = config(G, b)
            assert after is not None
            assert after.gamma > cfg.gamma


class TestAxiom2RoundTrip:
    """Residue linear equations lifted to G, refined once from 0"""

    def test_random_instances(self):
        """20 residue equations of order ≤ 1 over ℚ(s) are solved by the lifted step."""
        rng = random.Random(31)
        group, fld = ValueGroup.rational(1), RatShift()
        for _ in range(20):
            order = rng.randint(0, 1)
            alphas = [fld.coerce(rng.randint(-3, 3)) for _ in range(order + 1)]
            if all(fld.is_zero(x) for x in alphas):
                alphas[0] = fld.one()
            u = hensax1_roundtrip(group, fld, alphas)
            check = fld.one()
            for k, alpha in enumerate(alphas):
                check = check + alpha * fld.sigma(u, k)
            assert fld.is_zero(check)

    def test_function_field_coefficients(self):
        """1 + s·x − (s+1)·σ̄(x) = 0 is solved by x = 1."""
        group, fld = ValueGroup.rational(1), RatShift()
        u = hensax1_roundtrip(group, fld, [fld.gen(), fld.parse("-(s+1)")])
        assert fld.eq(u, fld.one())


class TestCoarsenedHenselianity:
    """Hahn series over the flat transseries K_w: σ-hensel configurations have roots"""

    def test_summation_configuration(self):
        """σ(y) − y − t·x⁻² is solved at distance t from 0 by discrete summation."""
        group, fld = ValueGroup.rational(1), FlatField(order=6)
        h = Transseries.x(-2)
        one = HahnSeries.constant(group, fld, 1)
        G = SigmaPoly.make(group, fld, 1, 1, [
            ((0, 1), one),
            ((1, 0), -one),
            ((0, 0), HahnSeries.monomial(group, fld, group.elem(1), -h)),
        ])
        a = HahnSeries.zero(group, fld)
        cfg = config(G, a)
        assert cfg.gamma == group.elem(1)
        report = solve(G, a)
        assert report.outcome == ROOT_FOUND
        root = report.root
        assert (root - a).valuation() == group.elem(1)
        u = root.coefficient(group.elem(1))
        assert (u.compose_shift() - u - h).is_zero()
