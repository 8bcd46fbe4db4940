"""Comb physics: Bessel evaluator, coupling matrix, dispersion, W and W_in."""

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from combrc.comb import (
    CombSpec,
    LoopParams,
    MZMParams,
    ModulatorParams,
    bessel_j,
    build_input_vector,
    build_internal_matrix,
    central_slice,
    dispersion_phases,
    line_offsets,
    pm_coupling_matrix,
    spectral_radius,
)


class TestBessel:
    def test_j0_at_zero(self):
        assert bessel_j(0, 0.0) == 1.0

    def test_higher_orders_at_zero(self):
        assert bessel_j(3, 0.0) == 0.0

    def test_near_first_zero_of_j0(self):
        # 2.4048 is within 1e-4 of the first root of J_0
        assert abs(bessel_j(0, 2.4048)) < 1e-4

    def test_negative_order_parity(self):
        for order in range(1, 8):
            assert bessel_j(-order, 1.7) == pytest.approx(
                (-1) ** order * bessel_j(order, 1.7), abs=1e-15
            )

    def test_against_scipy_grid(self):
        for order in range(0, 201, 3):
            for x in (0.0, 0.3, 1.0, 2.4048, 7.7, 17.3, 33.0, 50.0):
                assert bessel_j(order, x) == pytest.approx(
                    float(scipy.special.jv(order, x)), abs=1e-12
                )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bessel_j(201, 1.0)
        with pytest.raises(ValueError):
            bessel_j(0, -0.5)
        with pytest.raises(ValueError):
            bessel_j(0, 50.1)


class TestTypes:
    def test_comb_spec_invariants(self):
        with pytest.raises(ValueError):
            CombSpec(n_lines=0)
        with pytest.raises(ValueError):
            CombSpec(line_spacing_ghz=0.0)
        with pytest.raises(ValueError):
            CombSpec(guard_lines=-1)
        assert CombSpec(n_lines=20, guard_lines=24).total_lines == 68

    def test_modulator_phase_normalized(self):
        assert ModulatorParams(1.0, 7.0).rf_phase == pytest.approx(7.0 - 2 * np.pi)
        with pytest.raises(ValueError):
            ModulatorParams(-0.1)

    def test_loop_invariants(self):
        with pytest.raises(ValueError):
            LoopParams(feedback_coupling=1.2)
        with pytest.raises(ValueError):
            LoopParams(gain=-0.1)
        with pytest.raises(ValueError):
            LoopParams(spectral_radius_target=1.6)

    def test_mzm_invariants(self):
        with pytest.raises(ValueError):
            MZMParams(e0=0.0)
        with pytest.raises(ValueError):
            MZMParams(gamma=-1.0)


class TestCouplingMatrix:
    def test_no_modulation_is_identity(self):
        spec = CombSpec(n_lines=8, guard_lines=4)
        p = pm_coupling_matrix(spec, ModulatorParams(0.0))
        assert np.allclose(p, np.eye(spec.total_lines), atol=1e-15)

    def test_rows_subunitary(self):
        spec = CombSpec(n_lines=16, guard_lines=8)
        p = pm_coupling_matrix(spec, ModulatorParams(1.5, 0.0))
        assert np.all(np.sum(np.abs(p) ** 2, axis=1) <= 1 + 1e-12)

    def test_central_row_power_is_one(self):
        # Bessel identity: sum_k J_k(m)^2 = 1, so a guarded central row keeps
        # its full power
        spec = CombSpec(n_lines=2, guard_lines=31)  # M = 64
        p = pm_coupling_matrix(spec, ModulatorParams(1.0))
        mid = spec.total_lines // 2
        assert np.sum(np.abs(p[mid]) ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_guarded_rows_and_columns_near_unit_power(self):
        # every usable (central) row/column at guard >= 2 m + 20
        m = 2.0
        spec = CombSpec(n_lines=20, guard_lines=24)
        p = pm_coupling_matrix(spec, ModulatorParams(m, 0.9))
        sl = central_slice(spec.total_lines, spec.n_lines)
        assert np.abs(np.sum(np.abs(p) ** 2, axis=1)[sl] - 1).max() < 1e-9
        assert np.abs(np.sum(np.abs(p) ** 2, axis=0)[sl] - 1).max() < 1e-9

    def test_central_gram_approaches_identity_as_guard_grows(self):
        m = 1.3
        spec_small = CombSpec(n_lines=10, guard_lines=6)
        spec_big = CombSpec(n_lines=10, guard_lines=40)

        def central_gram_dev(spec):
            p = pm_coupling_matrix(spec, ModulatorParams(m, 0.4))
            gram = p.conj().T @ p
            sl = central_slice(spec.total_lines, spec.n_lines)
            return np.abs(gram[sl, sl] - np.eye(spec.n_lines)).max()

        assert central_gram_dev(spec_big) < 1e-10
        assert central_gram_dev(spec_big) < central_gram_dev(spec_small)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            pm_coupling_matrix(CombSpec(n_lines=500, guard_lines=10), ModulatorParams(1.0))


class TestDispersion:
    def test_zero_coeff_is_identity(self):
        spec = CombSpec(n_lines=6, guard_lines=2)
        d = dispersion_phases(spec, LoopParams(dispersion_coeff=0.0))
        assert np.allclose(d, 1.0, atol=1e-15)

    def test_unit_modulus(self):
        spec = CombSpec(n_lines=20, guard_lines=24)
        d = dispersion_phases(spec, LoopParams(dispersion_coeff=0.37))
        assert np.abs(np.abs(d) - 1).max() < 1e-14

    def test_quadratic_phase_value(self):
        spec = CombSpec(n_lines=9, guard_lines=0)
        d = dispersion_phases(spec, LoopParams(dispersion_coeff=0.1))
        offs = line_offsets(spec.total_lines)
        k3 = int(np.where(offs == 3)[0][0])
        assert np.angle(d[k3]) == pytest.approx(0.9, abs=1e-12)

    def test_conjugate_inverts(self):
        spec = CombSpec(n_lines=20, guard_lines=24)
        d = dispersion_phases(spec, LoopParams(dispersion_coeff=1.234))
        assert np.abs(d * d.conj() - 1).max() < 1e-14


class TestInternalMatrix:
    def test_diagonal_loop_no_mixing(self):
        spec = CombSpec(n_lines=8, guard_lines=4)
        w = build_internal_matrix(
            spec, ModulatorParams(0.0), LoopParams(feedback_coupling=0.9, gain=1.0,
                                                   dispersion_coeff=0.0)
        )
        assert np.allclose(w, 0.9 * np.eye(8), atol=1e-15)

    def test_spectral_radius_rescale(self):
        spec = CombSpec(n_lines=20, guard_lines=24)
        loop = LoopParams(feedback_coupling=0.8, gain=1.0, dispersion_coeff=0.1,
                          spectral_radius_target=0.95)
        w = build_internal_matrix(spec, ModulatorParams(1.2, 0.3), loop)
        assert spectral_radius(w) == pytest.approx(0.95, abs=1e-9)

    def test_passive_loop_contraction(self):
        # truncation of a unitary roundtrip is a contraction (SVD oracle)
        spec = CombSpec(n_lines=20, guard_lines=22)
        loop = LoopParams(feedback_coupling=1.0, gain=1.0, dispersion_coeff=0.05)
        w = build_internal_matrix(spec, ModulatorParams(1.2, 0.0), loop)
        assert np.linalg.svd(w, compute_uv=False).max() <= 1 + 1e-9

    def test_truncation_converged_in_guard_lines(self):
        m = 1.5
        pm = ModulatorParams(m, 0.6)
        loop = LoopParams(feedback_coupling=0.9, gain=1.0, dispersion_coeff=0.2)
        base = int(2 * m + 20)
        w1 = build_internal_matrix(CombSpec(n_lines=20, guard_lines=base), pm, loop)
        w2 = build_internal_matrix(CombSpec(n_lines=20, guard_lines=2 * base), pm, loop)
        assert np.abs(w1 - w2).max() < 1e-6

    def test_zero_radius_rejected(self):
        spec = CombSpec(n_lines=4, guard_lines=2)
        loop = LoopParams(feedback_coupling=0.0, gain=1.0, dispersion_coeff=0.0,
                          spectral_radius_target=0.9)
        with pytest.raises(ArithmeticError):
            build_internal_matrix(spec, ModulatorParams(0.5), loop)


class TestInputVector:
    def test_no_modulation_is_carrier_only(self):
        spec = CombSpec(n_lines=7, guard_lines=3)
        v = build_input_vector(spec, ModulatorParams(0.0))
        expected = np.zeros(7)
        expected[7 // 2] = 1.0
        assert np.allclose(v, expected, atol=1e-15)

    def test_norm_at_most_one(self):
        spec = CombSpec(n_lines=20, guard_lines=24)
        for m in (0.5, 1.8, 3.0):
            v = build_input_vector(spec, ModulatorParams(m, 1.1))
            assert np.linalg.norm(v) ** 2 <= 1 + 1e-12

    def test_norm_near_one_for_moderate_modulation(self):
        # central 20 squared Bessel coefficients at m = 1.8 carry almost all power
        spec = CombSpec(n_lines=20, guard_lines=24)
        v = build_input_vector(spec, ModulatorParams(1.8))
        expected = sum(bessel_j(k, 1.8) ** 2 for k in range(-10, 10))
        assert np.linalg.norm(v) ** 2 == pytest.approx(expected, abs=1e-12)
        assert abs(np.linalg.norm(v) ** 2 - 1.0) < 0.02


@settings(max_examples=25, deadline=None)
@given(
    m=st.floats(0.0, 2.0),
    phase=st.floats(0.0, 6.28),
    coeff=st.floats(-1.0, 1.0),
)
def test_roundtrip_operator_never_amplifies(m, phase, coeff):
    spec = CombSpec(n_lines=12, guard_lines=24)
    loop = LoopParams(feedback_coupling=1.0, gain=1.0, dispersion_coeff=coeff)
    w = build_internal_matrix(spec, ModulatorParams(m, phase), loop)
    assert np.linalg.norm(w, 2) <= 1 + 1e-9
