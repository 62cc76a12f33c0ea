"""Levi-Civita connection and curvature blocks in an adapted coframe.

The connection is computed from the Koszul formula on the orthonormal
basis, 2<nabla_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y>, then split
into the u(n) blocks mu (skew) and lambda (symmetric).  The structure
equation d(theta) = -omega ^ theta is asserted as an independent check,
because the Koszul route never solves it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import (
    DEFAULT_TOL,
    Form,
    FormMatrix,
    ZeroTolerance,
    a_form,
    b_form,
    kahler_form,
    wedge,
    wedge_matrix,
)
from .lie import AdaptedBasis, LieAlgebra, ce_differential, check_adapted, validate_lie_algebra


class NotKahlerError(Exception):
    """The Levi-Civita connection fails the u(n) block shape."""


@dataclass(frozen=True)
class ConnectionData:
    """Blocks of the connection form: mu is n x n skew, lam is n x n symmetric."""

    mu: FormMatrix
    lam: FormMatrix

    @property
    def n(self) -> int:
        return self.mu.rows

    def shape_residual(self) -> float:
        skew = (self.mu + self.mu.transpose()).norm_inf()
        sym = (self.lam - self.lam.transpose()).norm_inf()
        return max(skew, sym)


@dataclass(frozen=True)
class CurvatureData:
    """Curvature blocks: M skew, Lam symmetric, both of degree 2."""

    M: FormMatrix
    Lam: FormMatrix

    @property
    def n(self) -> int:
        return self.M.rows

    def shape_residual(self) -> float:
        skew = (self.M + self.M.transpose()).norm_inf()
        sym = (self.Lam - self.Lam.transpose()).norm_inf()
        return max(skew, sym)


def _koszul_matrix(L: LieAlgebra) -> FormMatrix:
    """Full connection one-form matrix omega^k_j with omega^k_j(e_i) = <nabla_{e_i} e_j, e_k>."""
    m = L.dim
    c = L.constants()
    # gamma[i, j, k] = (c[i,j,k] - c[j,k,i] + c[k,i,j]) / 2
    gamma = 0.5 * (c - np.einsum("jki->ijk", c) + np.einsum("kij->ijk", c))
    entries = []
    for k in range(m):
        row = []
        for j in range(m):
            row.append(Form(m, 1, {(i + 1,): gamma[i, j, k] for i in range(m)}))
        entries.append(row)
    return FormMatrix(entries)


def _structural_residual(L: LieAlgebra, omega: FormMatrix) -> float:
    theta = FormMatrix([[Form.basis(L.dim, i + 1)] for i in range(L.dim)])
    dtheta = theta.map(lambda f: ce_differential(L, f))
    return (dtheta + wedge_matrix(omega, theta)).norm_inf()


def _u_shape_residual(omega: FormMatrix, n: int) -> float:
    """Deviation of omega from the u(n) block pattern [[mu, lam], [-lam, mu]]."""
    worst = 0.0
    for i in range(n):
        for j in range(n):
            worst = max(worst, (omega[i, j] - omega[n + i, n + j]).norm_inf())
            worst = max(worst, (omega[i, n + j] + omega[n + i, j]).norm_inf())
    return worst


def levi_civita(L: LieAlgebra, B: AdaptedBasis, tol: ZeroTolerance = DEFAULT_TOL) -> ConnectionData:
    """Connection blocks (mu, lam) of the left-invariant metric.

    Raises NotKahlerError when the computed matrix does not commute with
    the complex structure, which is exactly failure of the Kahler
    condition for the declared J.
    """
    check_adapted(L, B)
    validate_lie_algebra(L)
    omega = _koszul_matrix(L)
    scale = 1.0 + L.max_constant()
    struct = _structural_residual(L, omega)
    if struct > 1e-10 * scale:
        raise RuntimeError(f"structure equation residual {struct:.3e}; Koszul assembly bug")
    n = B.n
    shape = _u_shape_residual(omega, n)
    if shape > tol.bound(scale):
        raise NotKahlerError(f"u(n) shape residual {shape:.3e}")
    mu = FormMatrix([[omega[i, j] for j in range(n)] for i in range(n)])
    lam = FormMatrix([[omega[i, n + j] for j in range(n)] for i in range(n)])
    conn = ConnectionData(mu, lam)
    if conn.shape_residual() > tol.bound(scale):
        raise NotKahlerError(f"block symmetry residual {conn.shape_residual():.3e}")
    return conn


@dataclass(frozen=True)
class KahlerReport:
    domega_norm: float
    shape_residual: float

    def is_kahler(self, tol: ZeroTolerance = DEFAULT_TOL, scale: float = 0.0) -> bool:
        return max(self.domega_norm, self.shape_residual) <= tol.bound(scale)


def kahler_check(L: LieAlgebra, B: AdaptedBasis) -> KahlerReport:
    """Diagnostic: closedness of the invariant two-form and the u(n) shape residual."""
    check_adapted(L, B)
    omega_s = kahler_form(B.n)
    domega = ce_differential(L, omega_s).norm_inf()
    shape = _u_shape_residual(_koszul_matrix(L), B.n)
    return KahlerReport(domega_norm=domega, shape_residual=shape)


def curvature(C: ConnectionData, L: LieAlgebra) -> CurvatureData:
    """M = d(mu) + mu^mu - lam^lam and Lam = d(lam) + mu^lam + lam^mu."""
    d = lambda mat: mat.map(lambda f: ce_differential(L, f))
    M = d(C.mu) + wedge_matrix(C.mu, C.mu) - wedge_matrix(C.lam, C.lam)
    Lam = d(C.lam) + wedge_matrix(C.mu, C.lam) + wedge_matrix(C.lam, C.mu)
    return CurvatureData(M, Lam)


def ch_model(n: int) -> CurvatureData:
    """Curvature blocks of complex hyperbolic space CH(n) at holomorphic
    sectional curvature -1: M = -a^a^T - b^b^T,
    Lam = -a^b^T + b^a^T - 2 omega_S id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    omega_s = kahler_form(n)
    M_rows, L_rows = [], []
    for i in range(1, n + 1):
        M_row, L_row = [], []
        for j in range(1, n + 1):
            M_ij = -wedge(a_form(n, i), a_form(n, j)) - wedge(b_form(n, i), b_form(n, j))
            L_ij = -wedge(a_form(n, i), b_form(n, j)) + wedge(b_form(n, i), a_form(n, j))
            if i == j:
                L_ij = L_ij - 2.0 * omega_s
            M_row.append(M_ij)
            L_row.append(L_ij)
        M_rows.append(M_row)
        L_rows.append(L_row)
    return CurvatureData(FormMatrix(M_rows), FormMatrix(L_rows))


def bianchi_residual(C: ConnectionData, K: CurvatureData, L: LieAlgebra) -> float:
    """Residual of the two differential curvature identities; vanishes whenever
    K was actually computed from C over a genuine Lie algebra."""
    d = lambda mat: mat.map(lambda f: ce_differential(L, f))
    mu, lam, M, Lam = C.mu, C.lam, K.M, K.Lam
    rM = d(M) - (
        wedge_matrix(M, mu) - wedge_matrix(mu, M)
        - wedge_matrix(Lam, lam) + wedge_matrix(lam, Lam)
    )
    rL = d(Lam) - (
        wedge_matrix(M, lam) - wedge_matrix(mu, Lam)
        + wedge_matrix(Lam, mu) - wedge_matrix(lam, M)
    )
    return max(rM.norm_inf(), rL.norm_inf())
