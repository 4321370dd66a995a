import math

import numpy as np
import pytest

from triwave.model import (
    BoundaryDecayError,
    FieldGrid,
    GridSpec,
    ModelParams,
    Packet,
    manley_rowe_invariants,
    packet_mass,
    residual_norm,
)


def make_grid(params, f1=None, f2=None, f3=None, x=(-10.0, 10.0, 101), t=(0.0, 1.0, 11)):
    spec = GridSpec(x[0], x[1], x[2], t[0], t[1], t[2])
    tt, xx = np.meshgrid(spec.ts, spec.xs, indexing="ij")
    zero = np.zeros_like(xx, dtype=complex)
    qs = [f(xx, tt) if f is not None else zero for f in (f1, f2, f3)]
    return FieldGrid(x[0], x[1], x[2], t[0], t[1], t[2], qs[0], qs[1], qs[2], params)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams(epsilon=0.4)
        assert p.speeds == (1.0, 0.0, -1.0)
        assert p.couplings == (1, -1, 1)
        assert p.supports_solitons()

    @pytest.mark.parametrize("eps", [0.0, -1.0, math.nan, math.inf])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError, match="epsilon"):
            ModelParams(epsilon=eps)

    def test_speed_ties_rejected(self):
        with pytest.raises(ValueError, match="strictly decreasing"):
            ModelParams(epsilon=1.0, speeds=(1.0, 1.0, -1.0))

    def test_speed_order_rejected(self):
        with pytest.raises(ValueError, match="strictly decreasing"):
            ModelParams(epsilon=1.0, speeds=(-1.0, 0.0, 1.0))

    def test_bad_coupling(self):
        with pytest.raises(ValueError, match="signs"):
            ModelParams(epsilon=1.0, couplings=(1, 2, 1))

    def test_explosive_pattern_has_no_lax(self):
        p = ModelParams(epsilon=1.0, couplings=(1, 1, 1))
        assert not p.supports_solitons()
        with pytest.raises(ValueError, match="skew-Hermitian"):
            p.lax()

    def test_conjugation_toggle_flips_effective_signs(self):
        p = ModelParams(epsilon=1.0, couplings=(-1, 1, -1), conjugate_fields=True)
        assert p.effective_couplings == (1, -1, 1)
        assert p.supports_solitons()

    def test_lax_coefficients(self):
        lax = ModelParams(epsilon=0.4).lax()
        assert lax.j_diag == (1.0, 0.0, -1.0)
        assert lax.k_diag == (-0.0, -1.0, 0.0)
        assert lax.gaps == (1.0, 2.0, 1.0)
        assert lax.rfactors[1] == pytest.approx(1.0)
        assert lax.rfactors[0] == pytest.approx(1.0 / math.sqrt(2.0))
        # gamma magnitudes match the r factors and mode 1 carries the i phase
        for g, r in zip(lax.gammas, lax.rfactors):
            assert abs(g) == pytest.approx(r)
        assert lax.gammas[0].real == pytest.approx(0.0)


class TestPacket:
    def test_default_support_obeys_truncation(self):
        p = Packet(mode=1, shape="sech")
        edge = p.envelope(np.array([p.support[1]]))[0]
        assert edge <= p.truncation_tol * p.amplitude * 1.01

    def test_explicit_support_must_match_tolerance(self):
        with pytest.raises(ValueError, match="truncation"):
            Packet(mode=1, shape="sech", support_halfwidth=3.0)

    def test_loose_tolerance_allows_narrow_support(self):
        p = Packet(mode=1, shape="sech", support_halfwidth=4.0, truncation_tol=0.04)
        assert p.envelope(np.array([5.0]))[0] == 0.0

    def test_multi_lobe_rejected(self):
        ys = np.linspace(-3, 3, 61)
        fs = np.exp(-((ys - 1.2) ** 2) * 4) + np.exp(-((ys + 1.2) ** 2) * 4)
        with pytest.raises(ValueError, match="single-lobe"):
            Packet(mode=1, shape="tabulated", samples=(tuple(ys), tuple(fs)))

    def test_tabulated_single_lobe_accepted(self):
        ys = np.linspace(-4, 4, 81)
        fs = 1.0 / np.cosh(ys) ** 2
        p = Packet(mode=2, shape="tabulated", samples=(tuple(ys), tuple(fs)))
        assert p.support == (-4.0, 4.0)
        mid = p.envelope(np.array([0.0]))[0]
        assert mid == pytest.approx(1.0, abs=1e-9)

    def test_negative_envelope_rejected(self):
        ys = np.linspace(-4, 4, 81)
        fs = np.sin(ys)
        with pytest.raises(ValueError, match="nonnegative"):
            Packet(mode=1, shape="tabulated", samples=(tuple(ys), tuple(fs)))

    def test_mode_validation(self):
        with pytest.raises(ValueError, match="mode"):
            Packet(mode=4)

    def test_translation_and_canonical(self):
        p = Packet(mode=3, shape="gaussian", amplitude=2.0, width=0.5, center=1.0)
        q = p.translated(2.0)
        assert q.center == 3.0
        c = p.canonical()
        assert c.width == 1.0 and c.center == 0.0
        ys = np.linspace(-2, 2, 7)
        np.testing.assert_allclose(p.envelope(1.0 + 0.5 * ys), c.envelope(ys), atol=1e-14)


class TestPacketMass:
    def test_sech_mass_is_pi(self):
        assert packet_mass(Packet(mode=1, shape="sech")) == pytest.approx(math.pi, rel=1e-10)

    def test_amplitude_homogeneity(self):
        assert packet_mass(Packet(mode=1, shape="sech", amplitude=2.0)) == pytest.approx(
            2.0 * math.pi, rel=1e-10
        )

    def test_gaussian_mass_is_sqrt_pi(self):
        assert packet_mass(Packet(mode=1, shape="gaussian")) == pytest.approx(
            math.sqrt(math.pi), rel=1e-10
        )

    def test_width_scaling(self):
        base = packet_mass(Packet(mode=1, shape="gaussian"))
        wide = packet_mass(Packet(mode=1, shape="gaussian", width=2.5))
        assert wide == pytest.approx(2.5 * base, rel=1e-9)


class TestResidualNorm:
    def test_zero_fields(self):
        rep = residual_norm(make_grid(ModelParams(epsilon=0.5)))
        assert rep.max_overall == 0.0
        assert rep.interior_count == 9 * 99

    def test_grid_too_small(self):
        with pytest.raises(ValueError, match="nx, nt"):
            residual_norm(make_grid(ModelParams(epsilon=0.5), t=(0.0, 1.0, 2)))

    def test_nonfinite_rejected(self):
        g = make_grid(ModelParams(epsilon=0.5))
        bad = np.array(g.q1, copy=True)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            residual_norm(
                FieldGrid(g.x_min, g.x_max, g.nx, g.t_min, g.t_max, g.nt,
                          bad, g.q2, g.q3, g.params)
            )

    def test_aligned_transport_is_exact(self):
        # c1 * ht = hx makes the centered stencils cancel identically.
        params = ModelParams(epsilon=0.7)
        f = lambda x, t: 1.0 / np.cosh(x - t) + 0j
        g = make_grid(params, f1=f, x=(-12.0, 12.0, 241), t=(0.0, 1.0, 11))
        assert g.hx == pytest.approx(g.ht)
        rep = residual_norm(g)
        assert rep.max_overall <= 1e-13

    def test_second_order_convergence_on_transport(self):
        params = ModelParams(epsilon=0.7)
        f = lambda x, t: 1.0 / np.cosh(x - t) + 0j
        maxes = []
        for n in (121, 241, 481):
            g = make_grid(params, f1=f, x=(-12.0, 12.0, n), t=(0.0, 0.7, (n - 1) // 4 + 1))
            maxes.append(residual_norm(g).max_overall)
        for a, b in zip(maxes[:-1], maxes[1:]):
            assert 3.5 <= a / b <= 4.5


class TestManleyRowe:
    def test_zero_fields(self):
        mr = manley_rowe_invariants(make_grid(ModelParams(epsilon=0.5)))
        assert mr.shape == (3, 11)
        assert np.all(mr == 0.0)

    def test_single_mode_transport_conserves(self):
        params = ModelParams(epsilon=0.5)
        f = lambda x, t: 2.0 / np.cosh(x - t) + 0j
        g = make_grid(params, f1=f, x=(-30.0, 30.0, 2001), t=(0.0, 1.0, 5))
        mr = manley_rowe_invariants(g)
        drift = np.max(np.abs(mr - mr[:, :1]))
        assert drift <= 1e-8

    def test_boundary_decay_required(self):
        params = ModelParams(epsilon=0.5)
        f = lambda x, t: np.ones_like(x) + 0j
        g = make_grid(params, f1=f)
        with pytest.raises(BoundaryDecayError):
            manley_rowe_invariants(g)
        mr = manley_rowe_invariants(g, periodic=True)
        assert np.all(np.isfinite(mr))


class TestGridContainers:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            FieldGrid(0, 1, 3, 0, 1, 2, np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 3)),
                      ModelParams(epsilon=1.0))

    def test_spec_refined(self):
        spec = GridSpec(-1.0, 1.0, 11, 0.0, 2.0, 5)
        fine = spec.refined()
        assert (fine.nx, fine.nt) == (21, 9)
        np.testing.assert_allclose(fine.xs[::2], spec.xs)

    def test_values_read_only(self):
        g = make_grid(ModelParams(epsilon=1.0))
        with pytest.raises(ValueError):
            g.q1[0, 0] = 1.0
