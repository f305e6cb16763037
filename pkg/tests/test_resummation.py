import math

import numpy as np
import pytest

from levygraph.evaluator import BetaSeries, large_diffusion_series
from levygraph.model import EvalPoint, LevyJumpSpec, SymTensor
from levygraph.resummation import (
    BorelSpec,
    ExperimentalOnly,
    PoleOnPath,
    ResumMethod,
    SingularSystem,
    ZeroDenominatorH1,
    borel_resum,
    borel_transform,
    eval_pade,
    pade,
    pade_11_closed,
    pade_log_density_2nd,
    parse_method,
    poles_on_path,
    resum,
)

EXP = [1 / math.factorial(m) for m in range(8)]
LOG1P = [0.0] + [(-1) ** (m + 1) / m for m in range(1, 8)]


def jump_spec(z=2.0, s=6.0, mu=1.25):
    return LevyJumpSpec.from_atoms([z * s], [[mu]], z, [[s]], [1.0], 4)


class TestPade:
    def test_exponential_two_two(self):
        p = pade(EXP, 2, 2)
        np.testing.assert_allclose(p.a, [1.0, 0.5, 1 / 12], rtol=1e-12)
        np.testing.assert_allclose(p.b, [-0.5, 1 / 12], rtol=1e-12)

    def test_log1p_one_one(self):
        p = pade(LOG1P, 1, 1)
        np.testing.assert_allclose(p.a, [0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(p.b, [0.5])
        assert eval_pade(p, 1.0) == pytest.approx(2 / 3)

    def test_geometric_series_is_exact(self):
        p = pade([1.0, 1.0, 1.0, 1.0], 0, 1)
        assert eval_pade(p, 0.5) == pytest.approx(2.0)
        assert eval_pade(p, -3.0) == pytest.approx(0.25)

    @pytest.mark.parametrize("M,N", [(0, 0), (1, 1), (2, 1), (1, 2), (3, 3)])
    def test_reproduces_taylor_coefficients(self, M, N):
        rng = np.random.default_rng(M * 10 + N)
        h = rng.normal(size=M + N + 1)
        np.testing.assert_allclose(pade(h, M, N).taylor(M + N), h, rtol=1e-9, atol=1e-12)

    def test_zero_denominator_degree_is_partial_sum(self):
        p = pade(EXP, 3, 0)
        assert eval_pade(p, 0.7) == pytest.approx(sum(EXP[m] * 0.7 ** m for m in range(4)))

    def test_improves_on_partial_sum(self):
        value = eval_pade(pade(LOG1P, 2, 2), 1.0)
        partial = sum(LOG1P[:5])
        assert abs(value - math.log(2)) < 1e-3 < abs(partial - math.log(2))

    def test_closed_form_matches_solver(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            h = rng.normal(size=3)
            a, b = pade(h, 1, 1), pade_11_closed(h)
            np.testing.assert_allclose(a.a, b.a, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(a.b, b.b, rtol=1e-12)

    def test_singular_system(self):
        with pytest.raises(SingularSystem):
            pade([1.0, 0.0, 0.0], 1, 1)
        with pytest.raises(SingularSystem):
            pade_11_closed([1.0, 0.0, 2.0])
        with pytest.raises(SingularSystem):
            pade([1.0, 1.0, 1.0, 1.0, 1.0], 1, 2)

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            pade(EXP[:2], 1, 1)
        with pytest.raises(ValueError):
            pade(EXP, -1, 1)

    def test_accepts_beta_series(self):
        s = BetaSeries(2, tuple(LOG1P[:3]), "phi", 1.0, (0.0,))
        assert pade(s, 1, 1).b == pade(LOG1P, 1, 1).b


class TestPoles:
    p = pade([1.0, 1.0, 1.0], 0, 1)  # 1/(1 − β)

    def test_pole_on_path(self):
        assert poles_on_path(self.p, 2.0) == pytest.approx([1.0])
        with pytest.raises(PoleOnPath):
            eval_pade(self.p, 2.0)
        with pytest.raises(PoleOnPath):
            eval_pade(self.p, 1.0)

    def test_pole_off_path(self):
        assert poles_on_path(self.p, 0.5) == []
        assert poles_on_path(self.p, -4.0) == []
        assert poles_on_path(self.p, 0.0) == []

    def test_negative_direction(self):
        p = pade([1.0, -1.0, 1.0], 0, 1)  # 1/(1 + β)
        with pytest.raises(PoleOnPath):
            eval_pade(p, -2.0)

    def test_simple_rational_value(self):
        from levygraph.resummation import PadeApprox

        assert eval_pade(PadeApprox(1, 1, (0.0, -1.0), (2.0,)), 1.0) == pytest.approx(-1 / 3)
        assert eval_pade(PadeApprox(1, 1, (0.5, -1.0), (2.0,)), 0.0) == 0.5

    def test_complex_poles_ignored(self):
        p = pade([1.0, 0.0, -1.0, 0.0, 1.0], 0, 2)  # 1/(1 + β²)
        assert eval_pade(p, 3.0) == pytest.approx(0.1)


class TestClosedLogDensity:
    def test_second_order_coefficients(self):
        """At φ = 0.5 with z = 2, s = 6, a = 12, t = 1: h₁ = −72.25, h₂ = 6948."""
        s = large_diffusion_series(jump_spec(), None, EvalPoint(1.0, (0.5,)), 2, log=True)
        np.testing.assert_allclose(s.coeffs, [0.0, -72.25, 6948.0], rtol=1e-13)

    @pytest.mark.parametrize("phi", [-3.0, -0.2, 0.0, 0.5, 4.0])
    def test_matches_generic_pade(self, phi):
        spec = jump_spec()
        s = large_diffusion_series(spec, None, EvalPoint(1.0, (phi,)), 2, log=True)
        for beta in (0.01, 0.2, 5.0):
            assert pade_log_density_2nd(spec, 1.25, 1.0, phi, beta) == pytest.approx(
                eval_pade(pade(s, 1, 1), beta), rel=1e-12)

    def test_negative_and_finite_over_range(self):
        phi = np.linspace(-20.0, 40.0, 241)
        out = pade_log_density_2nd(jump_spec(), 1.25, 1.0, phi, 0.2)
        assert np.all(np.isfinite(out)) and np.all(out < 0)

    def test_vectorized(self):
        spec = jump_spec()
        phi = np.linspace(-2, 2, 5)
        out = pade_log_density_2nd(spec, None, 1.0, phi, 0.2)
        assert out.shape == (5,)
        assert out[1] == pytest.approx(pade_log_density_2nd(spec, None, 1.0, phi[1], 0.2))
        assert isinstance(pade_log_density_2nd(spec, None, 1.0, 0.3, 0.2), float)

    def test_without_jumps_is_gaussian(self):
        spec = LevyJumpSpec(1, [0.0], [[0.5]], 0.0)
        assert pade_log_density_2nd(spec, 0.5, 1.0, 1.5, 0.5) == pytest.approx(-0.5 * 2.25)
        assert pade_log_density_2nd(spec, 0.5, 1.0, 0.0, 0.5) == 0.0

    def test_denominator_never_vanishes(self):
        """κ₃² ≤ κ₂κ₄ keeps the [1/1] denominator at least 1 for every jump law."""
        rng = np.random.default_rng(12)
        for _ in range(50):
            k = rng.integers(1, 4)
            spec = LevyJumpSpec.from_atoms([0.0], [[0.1]], rng.uniform(0.1, 3), rng.normal(size=(k, 1)) * 3,
                                           rng.uniform(0.1, 1, size=k), 4)
            s = large_diffusion_series(spec, None, EvalPoint(1.0, (rng.normal() * 5,)), 2, log=True)
            h1, h2 = s.coeffs[1], s.coeffs[2]
            assert h2 / -h1 >= 0.0
            assert poles_on_path(pade(s, 1, 1), 1e6) == []

    def test_zero_h1_with_nonzero_h2(self):
        moments = {n: SymTensor.scalar1d(n, v) for n, v in {1: 0.0, 2: 0.0, 3: 0.0, 4: 1.0}.items()}
        spec = LevyJumpSpec(1, [0.0], [[0.0]], 1.0, moments)
        with pytest.raises(ZeroDenominatorH1):
            pade_log_density_2nd(spec, None, 1.0, 0.0, 0.1)

    def test_two_dimensional_rejected(self):
        from levygraph.model import ModelError

        with pytest.raises(ModelError):
            pade_log_density_2nd(LevyJumpSpec(2, [0, 0], np.eye(2), 0.0), None, 1.0, (0.0, 0.0), 0.1)


class TestBorel:
    def test_transform(self):
        np.testing.assert_allclose(borel_transform([1.0, 2.0, 6.0]), [1.0, 2.0, 3.0])

    @pytest.mark.parametrize("beta", [0.0, 0.3, 2.0])
    def test_truncated_series_gives_partial_sum(self, beta):
        h = [1.0, -0.5, 0.25, -0.1]
        assert borel_resum(h, beta) == pytest.approx(sum(c * beta ** m for m, c in enumerate(h)), rel=1e-12)

    def test_log_series_needs_flag(self):
        s = BetaSeries(1, (0.0, -1.0), "log_phi", 1.0, (0.0,))
        with pytest.raises(ExperimentalOnly):
            borel_resum(s, 0.5)
        assert borel_resum(s, 0.5, experimental=True) == pytest.approx(-0.5)

    def test_large_diffusion_prefactor(self):
        s = BetaSeries(1, (1.0, -1.0), "large_diffusion", 1.0, (1.0, 0.0))
        assert borel_resum(s, 0.5) == pytest.approx(0.5 * (0.5 / math.pi))

    def test_validation(self):
        with pytest.raises(ValueError):
            borel_resum([1.0], -1.0)
        with pytest.raises(ValueError):
            BorelSpec(1)


class TestMethodSelection:
    @pytest.mark.parametrize("text,expected", [
        ("partial", ResumMethod("partial")),
        ("pade:1/1", ResumMethod("pade", 1, 1)),
        ("pade:2/3", ResumMethod("pade", 2, 3)),
        ("borel", ResumMethod("borel", nodes=64)),
        ("borel:32", ResumMethod("borel", nodes=32)),
    ])
    def test_parse(self, text, expected):
        m = parse_method(text)
        assert m == expected
        assert parse_method(str(m)) == m

    @pytest.mark.parametrize("text", ["pade", "pade:1", "borel:1", "taylor", "pade:a/b"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_method(text)

    def test_dispatch(self):
        s = BetaSeries(2, tuple(LOG1P[:3]), "phi", 1.0, (0.0,))
        assert resum(s, 1.0, parse_method("partial")) == pytest.approx(0.5)
        assert resum(s, 1.0, parse_method("pade:1/1")) == pytest.approx(2 / 3)
        assert resum(s, 1.0, parse_method("borel")) == pytest.approx(0.5)
