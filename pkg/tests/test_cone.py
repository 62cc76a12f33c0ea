import math

import pytest

from pskmap.catalog import (
    abelian,
    ch1,
    ch1_candidate,
    ch1_flat_candidate,
    complex_hyperbolic,
    complex_hyperbolic_candidate,
    four_dim_candidate,
    four_dim_example,
)
from pskmap.cone import (
    CForm,
    DSquaredError,
    TrigLaurent,
    cone_coframe,
    cone_lc,
    eta_from_pq,
    integrability_display_residual,
    oracle_residual,
    special_block_residual,
    special_blocks,
    verify_eta_conditions,
)
from pskmap.connection import levi_civita
from pskmap.forms import Form
from pskmap.intrinsic import SymTensor3, all_residuals, pq_from_tensors, rotate_tensors


class TestTrigLaurent:
    def test_product_and_reduction(self):
        s = TrigLaurent.sin_tau()
        c = TrigLaurent.cos_tau()
        s2 = s * s
        # sin^2 = 1 - cos^2
        assert s2.terms == {(0, 0, 0): 1.0, (0, 2, 0): -1.0}
        prod = (s * c) * (s * c)
        tau = 0.77
        assert prod.eval(1.0, tau) == pytest.approx((math.sin(tau) * math.cos(tau)) ** 2)

    def test_derivatives(self):
        f = TrigLaurent.t_power(2) * TrigLaurent.cos_tau()
        t, tau = 1.3, 0.4
        assert f.dt().eval(t, tau) == pytest.approx(2 * t * math.cos(tau))
        assert f.dtau().eval(t, tau) == pytest.approx(-t * t * math.sin(tau))

    def test_double_angle(self):
        tau = 1.1
        assert TrigLaurent.cos_2tau().eval(1.0, tau) == pytest.approx(math.cos(2 * tau))
        assert TrigLaurent.sin_2tau().eval(1.0, tau) == pytest.approx(math.sin(2 * tau))

    def test_laurent_negative_power(self):
        f = TrigLaurent.t_power(-2, 3.0)
        assert f.eval(2.0, 0.0) == pytest.approx(0.75)
        assert f.dt().eval(2.0, 0.0) == pytest.approx(-6.0 / 8.0)

    def test_constant_detection(self):
        f = TrigLaurent.const(2.0) + TrigLaurent.sin_tau() * 0.0
        assert f.is_constant()
        g = TrigLaurent.sin_tau() * TrigLaurent.sin_tau() + TrigLaurent.cos_tau() * TrigLaurent.cos_tau()
        assert g.is_constant() and g.constant_part() == pytest.approx(1.0)


class TestConeCoframe:
    def test_d_psi_hat_zero(self):
        L, B = four_dim_example()
        CA = cone_coframe(L, B, four_dim_candidate().kappa)
        psi_hat = CA.hatted_coframe()[-1]
        assert CA.d(psi_hat).norm_inf() == 0.0

    def test_d_phi_hat_display(self):
        L, B = four_dim_example()
        CA = cone_coframe(L, B, four_dim_candidate().kappa)
        phi_hat = CA.hatted_coframe()[2 * 2]
        # at t=1: psi ^ phi + 2 a~^T ^ b~
        got = CA.d(phi_hat).eval_at(1.0, 0.0)
        m = CA.m
        expect = Form(m, 2, {(5, 6): -1.0, (1, 3): 2.0, (2, 4): 2.0})
        assert (got - expect).norm_inf() < 1e-12

    def test_d_hatted_base(self):
        L, B = ch1(2.0)
        CA = cone_coframe(L, B, ch1_flat_candidate(2.0).kappa)
        a_hat = CA.hatted_coframe()[0]
        # d(t a~) = psi ^ a~ + t d(a~); here d(a~) = 0
        got = CA.d(a_hat)
        expect = CForm.basis(CA.m, CA.idx_psi).wedge(CForm.basis(CA.m, 1))
        assert (got - expect).norm_inf() < 1e-14

    def test_d_tau_one_form_closed(self):
        L, B = four_dim_example()
        CA = cone_coframe(L, B, four_dim_candidate().kappa)
        assert CA.d(CA.dtau_one_form()).norm_inf() < 1e-14

    def test_d_squared_zero(self):
        L, B = four_dim_example()
        CA = cone_coframe(L, B, four_dim_candidate().kappa)
        assert CA.d_squared_residual() < 1e-12

    def test_bad_kappa_rejected(self):
        L, B = ch1(2.0)
        with pytest.raises(DSquaredError):
            cone_coframe(L, B, Form(2, 1, {(2,): 1.0}))  # d(kappa) = 2 omega


class TestConeLeviCivita:
    def test_abelian_cone_structural(self):
        L, B = abelian(1)
        CA = cone_coframe(L, B, None)
        cone_lc(CA, levi_civita(L, B))  # raises on any residual

    def test_ch1_structural(self):
        L, B = ch1(2.0)
        CA = cone_coframe(L, B, ch1_flat_candidate(2.0).kappa)
        cone_lc(CA, levi_civita(L, B))

    def test_product_structural(self):
        L, B = four_dim_example()
        CA = cone_coframe(L, B, four_dim_candidate().kappa)
        cone_lc(CA, levi_civita(L, B))


class TestEta:
    def test_tau_zero_slice_is_p(self):
        L, B = four_dim_example()
        cand = four_dim_candidate()
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        eta = eta_from_pq(CA, p, q)
        for i in range(2):
            for j in range(2):
                u0 = eta.u[i, j].eval_at(1.0, 0.0)
                lifted = CForm.from_form(p[i, j], CA.m).eval_at(1.0, 0.0)
                assert (u0 - lifted).norm_inf() < 1e-14
                v0 = eta.v[i, j].eval_at(1.0, 0.0)
                lifted_q = CForm.from_form(q[i, j], CA.m).eval_at(1.0, 0.0)
                assert (v0 - lifted_q).norm_inf() < 1e-14

    def test_quarter_z_slice(self):
        # at tau = pi/8 the rotation angle is pi/4: u = (p - q)/sqrt(2)
        L, B = four_dim_example()
        cand = four_dim_candidate()
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        eta = eta_from_pq(CA, p, q)
        u = eta.u[0, 1].eval_at(1.0, math.pi / 8)
        expect = (CForm.from_form(p[0, 1], CA.m).eval_at(1.0, 0.0)
                  - CForm.from_form(q[0, 1], CA.m).eval_at(1.0, 0.0)) * (1 / math.sqrt(2))
        assert (u - expect).norm_inf() < 1e-12

    def test_zero_candidate_zero_eta(self):
        L, B = ch1(2.0)
        cand = ch1_flat_candidate(2.0)
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        assert eta_from_pq(CA, p, q).matrix.norm_inf() == 0.0


class TestEtaConditions:
    def _report(self, L, B, cand):
        conn = levi_civita(L, B)
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        eta = eta_from_pq(CA, p, q)
        omega = cone_lc(CA, conn)
        return verify_eta_conditions(CA, eta, omega + eta.matrix)

    def test_worked_example_all_zero(self):
        L, B = four_dim_example()
        rep = self._report(L, B, four_dim_candidate())
        assert max(rep.values()) < 1e-12

    def test_flat_cone_all_zero(self):
        L, B = ch1(2.0)
        rep = self._report(L, B, ch1_flat_candidate(2.0))
        assert max(rep.values()) < 1e-12

    def test_obstructed_case_flatness_only(self):
        L, B = ch1(1.5)
        rep = self._report(L, B, ch1_candidate(1.5))
        flat = rep.pop("flatness")
        assert max(rep.values()) < 1e-12
        assert flat > 1e-3


class TestSpecialBlocks:
    def test_worked_example_vanishes_identically(self):
        L, B = four_dim_example()
        cand = four_dim_candidate()
        conn = levi_civita(L, B)
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        T, U, V, W = special_blocks(CA, conn, p, q)
        assert max(x.norm_inf() for x in (T, U, V, W)) < 1e-12

    def test_flat_model(self):
        for n in (1, 2):
            L, B = complex_hyperbolic(n)
            cand = complex_hyperbolic_candidate(n)
            conn = levi_civita(L, B)
            CA = cone_coframe(L, B, cand.kappa)
            p, q = pq_from_tensors(cand.Sa, cand.Sb)
            assert special_block_residual(CA, conn, p, q) < 1e-12

    def test_doubled_kappa_breaks_uv_only(self):
        L, B = four_dim_example()
        cand = four_dim_candidate()
        conn = levi_civita(L, B)
        CA = cone_coframe(L, B, cand.kappa)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        T, U, V, W = special_blocks(CA, conn, p, q, kappa=2.0 * cand.kappa)
        assert T.norm_inf() < 1e-12
        assert W.norm_inf() < 1e-12
        assert U.norm_inf() > 1.0
        assert V.norm_inf() > 1.0

    def test_tau_independence_of_T_and_W(self, rng):
        L, B = four_dim_example()
        conn = levi_civita(L, B)
        kappa = four_dim_candidate().kappa
        CA = cone_coframe(L, B, kappa)
        count = 0
        for _ in range(100):
            sa = SymTensor3.from_vector(2, rng.uniform(-1, 1, 4))
            sb = SymTensor3.from_vector(2, rng.uniform(-1, 1, 4))
            p, q = pq_from_tensors(sa, sb)
            T, U, V, W = special_blocks(CA, conn, p, q)
            assert T.nonconstant_norm() < 1e-12
            assert W.nonconstant_norm() < 1e-12
            count += 1
        assert count == 100

    def test_differentiated_flatness_displays(self):
        # T = W = 0 with torsion makes the displayed (u, v) integrability
        # pair vanish even when U, V do not (kappa shifted off the solution)
        L, B = four_dim_example()
        cand = four_dim_candidate()
        conn = levi_civita(L, B)
        p, q = pq_from_tensors(cand.Sa, cand.Sb)
        shifted = cand.kappa + 0.4 * Form.basis(4, 1)
        CA = cone_coframe(L, B, shifted)
        T, U, V, W = special_blocks(CA, conn, p, q)
        assert max(T.norm_inf(), W.norm_inf()) < 1e-12
        assert max(U.norm_inf(), V.norm_inf()) > 0.1
        assert integrability_display_residual(CA, conn, p, q) < 1e-12


class TestOracleEquivalence:
    def test_solutions_and_non_solutions_agree(self, rng):
        cases = []
        L6, B6 = four_dim_example()
        cand6 = four_dim_candidate()
        cases.append((L6, B6, cand6, True))
        sa, sb = rotate_tensors(cand6.Sa, cand6.Sb, 1.1)
        from pskmap.intrinsic import PSKCandidate

        cases.append((L6, B6, PSKCandidate(sa, sb, cand6.kappa), True))
        cases.append((L6, B6,
                      PSKCandidate(SymTensor3.from_triples(2, [(1, 1, 1, 0.7)]),
                                   SymTensor3.zero(2), cand6.kappa), False))
        L1, B1 = ch1(2.0)
        cases.append((L1, B1, ch1_flat_candidate(2.0), True))
        c43 = 2.0 / math.sqrt(3.0)
        L4, B4 = ch1(c43)
        cases.append((L4, B4, ch1_candidate(c43), True))
        L15, B15 = ch1(1.5)
        cases.append((L15, B15, ch1_candidate(1.5), False))
        for L, B, cand, should_pass in cases:
            intrinsic = max(all_residuals(L, B, cand).values())
            cone = oracle_residual(L, B, cand)
            assert (intrinsic < 1e-9) == should_pass
            assert (cone < 1e-9) == should_pass
            if not should_pass:
                ratio = cone / intrinsic
                assert 0.25 <= ratio <= 4.0

    def test_three_factor_case(self, rng):
        from pskmap.catalog import ch1_cubed, ch1_cubed_candidate
        from pskmap.intrinsic import PSKCandidate

        L, B = ch1_cubed(2.0)
        good = ch1_cubed_candidate()
        assert oracle_residual(L, B, good) < 1e-12
        bad = PSKCandidate(
            SymTensor3.from_vector(3, rng.uniform(-1, 1, 10)),
            SymTensor3.from_vector(3, rng.uniform(-1, 1, 10)),
            good.kappa,
        )
        intrinsic = max(all_residuals(L, B, bad).values())
        cone = oracle_residual(L, B, bad)
        assert intrinsic > 1e-9 and cone > 1e-9
        assert 0.25 <= cone / intrinsic <= 4.0
