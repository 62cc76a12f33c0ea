"""Numerical discovery of PSK candidates by damped least squares.

The unknowns are the two symmetric-tensor coefficient blocks of q plus
the free coefficients of kappa along the closed one-forms.  Every
residual entry is a polynomial of degree <= 2 in the unknowns, so the
whole stacked system is compiled once into (constant, linear, quadratic)
numpy data; evaluation and the exact Jacobian are then three einsums.

When the invariant Kahler form has no invariant primitive the
kappa-dependent equations cannot be posed; geometries built with
allow_nonexact=True fall back to the kappa-free stack (curvature
equations plus the integrability pair), which is a necessary subsystem
and enough to falsify candidates families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .connection import ConnectionData, CurvatureData, curvature, levi_civita
from .forms import Form, all_keys, kahler_form
from .intrinsic import (
    PSKCandidate,
    SymTensor3,
    dpq_matrices,
    integrability_matrices,
    pq_from_tensors,
    rotate_tensors,
    sym_triples,
    tpq_matrix,
    wpq_matrix,
)
from .lie import AdaptedBasis, LieAlgebra, NotExactError, solve_primitive


@dataclass(frozen=True)
class SolveConfig:
    starts: int = 64
    seed: int = 0
    max_iters: int = 500
    lm_damping_init: float = 1e-3
    success_threshold: float = 1e-8
    infeasibility_floor: float = 1e-2
    init_scale: float = 1.0

    def __post_init__(self):
        if min(self.success_threshold, self.infeasibility_floor,
               self.lm_damping_init, self.init_scale) <= 0:
            raise ValueError("thresholds must be positive")
        if self.success_threshold >= self.infeasibility_floor:
            raise ValueError("success_threshold must sit below infeasibility_floor")
        if self.starts < 1 or self.max_iters < 1:
            raise ValueError("starts and max_iters must be positive")


@dataclass
class Geometry:
    """Fixed data of one solve: algebra, connection, curvature and kappa split."""

    L: LieAlgebra
    B: AdaptedBasis
    conn: ConnectionData
    curv: CurvatureData
    kappa0: Form | None
    kernel: list
    exact: bool
    _compiled: object = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.B.n

    @property
    def n_tensor(self) -> int:
        return len(sym_triples(self.n))

    @property
    def n_unknowns(self) -> int:
        base = 2 * self.n_tensor
        return base + (len(self.kernel) if self.exact else 0)

    def unpack(self, x: np.ndarray):
        t = self.n_tensor
        Sa = SymTensor3.from_vector(self.n, x[:t])
        Sb = SymTensor3.from_vector(self.n, x[t:2 * t])
        kappa = None
        if self.exact:
            kappa = self.kappa0
            for coeff, form in zip(x[2 * t:], self.kernel):
                kappa = kappa + float(coeff) * form
        return Sa, Sb, kappa

    def pack(self, cand: PSKCandidate) -> np.ndarray:
        """Inverse of unpack; projects the candidate's kappa on the kernel."""
        vec = [cand.Sa.to_vector(), cand.Sb.to_vector()]
        if self.exact:
            m = self.L.dim
            diff = cand.kappa - self.kappa0
            rhs = np.array([diff.coeffs.get((i,), 0.0) for i in range(1, m + 1)])
            A = np.array([[f.coeffs.get((i,), 0.0) for f in self.kernel]
                          for i in range(1, m + 1)])
            if self.kernel:
                coeffs, *_ = np.linalg.lstsq(A, rhs, rcond=None)
                if np.abs(A @ coeffs - rhs).max() > 1e-9:
                    raise ValueError("candidate kappa is not a primitive plus kernel")
            else:
                coeffs = np.zeros(0)
            vec.append(coeffs)
        return np.concatenate(vec)


def build_geometry(L: LieAlgebra, B: AdaptedBasis, *, allow_nonexact: bool = False) -> Geometry:
    conn = levi_civita(L, B)
    curv = curvature(conn, L)
    try:
        kappa0, kernel = solve_primitive(L, kahler_form(B.n))
        exact = True
    except NotExactError:
        if not allow_nonexact:
            raise
        kappa0, kernel, exact = None, [], False
    return Geometry(L=L, B=B, conn=conn, curv=curv, kappa0=kappa0,
                    kernel=kernel, exact=exact)


# -- residual stacking -------------------------------------------------


def _flatten(matrices, keys) -> np.ndarray:
    out = []
    for mat in matrices:
        for i in range(mat.rows):
            for j in range(mat.cols):
                coeffs = mat[i, j].coeffs
                out.extend(coeffs.get(k, 0.0) for k in keys)
    return np.asarray(out)


def residual_vector(cand_or_x, geom: Geometry) -> np.ndarray:
    """Deterministic flattening of all residual forms for one candidate.

    Exact geometries stack the two curvature equations and the two
    derivative equations; kappa-free geometries replace the derivative
    pair by the integrability pair.
    """
    if isinstance(cand_or_x, PSKCandidate):
        x = geom.pack(cand_or_x)
    else:
        x = np.asarray(cand_or_x, dtype=float)
    Sa, Sb, kappa = geom.unpack(x)
    p, q = pq_from_tensors(Sa, Sb)
    m = geom.L.dim
    two_keys = all_keys(m, 2)
    mats = [tpq_matrix(geom.curv, p, q), wpq_matrix(geom.curv, p, q)]
    stacked = [_flatten(mats, two_keys)]
    if geom.exact:
        rp, rq = dpq_matrices(p, q, kappa, geom.conn, geom.L)
        stacked.append(_flatten([rp, rq], two_keys))
    else:
        r1, r2 = integrability_matrices(geom.curv, p, q)
        stacked.append(_flatten([r1, r2], all_keys(m, 3)))
    return np.concatenate(stacked)


class CompiledResidual:
    """r(x) = r0 + A x + <Q, x ox x> with symmetric Q; exact by degree-2-ness."""

    def __init__(self, geom: Geometry):
        d = geom.n_unknowns
        r0 = residual_vector(np.zeros(d), geom)
        R = len(r0)
        A = np.zeros((R, d))
        Q = np.zeros((R, d, d))
        plus, minus = [], []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            plus.append(residual_vector(e, geom))
            minus.append(residual_vector(-e, geom))
            A[:, i] = 0.5 * (plus[i] - minus[i])
            Q[:, i, i] = 0.5 * (plus[i] + minus[i]) - r0
        for i in range(d):
            for j in range(i + 1, d):
                e = np.zeros(d)
                e[i] = e[j] = 1.0
                rij = residual_vector(e, geom)
                cross = 0.5 * (rij - plus[i] - plus[j] + r0)
                Q[:, i, j] = cross
                Q[:, j, i] = cross
        self.r0, self.A, self.Q = r0, A, Q

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.r0 + self.A @ x + np.einsum("rij,i,j->r", self.Q, x, x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.A + 2.0 * np.einsum("rij,j->ri", self.Q, x)


def compiled(geom: Geometry) -> CompiledResidual:
    if geom._compiled is None:
        geom._compiled = CompiledResidual(geom)
    return geom._compiled


# -- damped least squares ---------------------------------------------


def _lm_minimize(fun: CompiledResidual, x0: np.ndarray, cfg: SolveConfig):
    x = x0.copy()
    lam = cfg.lm_damping_init
    r = fun(x)
    cost = float(r @ r)
    for _ in range(cfg.max_iters):
        if np.abs(r).max() < 1e-14:
            break
        J = fun.jacobian(x)
        g = J.T @ r
        if np.abs(g).max() < 1e-16:
            break
        H = J.T @ J
        diag = np.diag(np.maximum(np.diag(H), 1e-12))
        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(H + lam * diag, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H + lam * diag, -g, rcond=None)[0]
            r_new = fun(x + step)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                x = x + step
                r, cost = r_new, cost_new
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 4.0
            if lam > 1e14:
                break
        if not accepted:
            break
    return x, float(np.abs(r).max())


@dataclass
class SolveResult:
    status: str
    best_residual: float
    candidate: PSKCandidate | None
    gauge_note: str
    per_equation: dict
    mode: str
    start_residuals: list
    distinct_orbits: int
    raw_solution: np.ndarray | None = None


def _gauge_angle(Sa: SymTensor3, Sb: SymTensor3):
    """Rotation making the dominant tensor entry land entirely in Sa, >= 0."""
    va, vb = Sa.to_vector(), Sb.to_vector()
    mags = va ** 2 + vb ** 2
    if mags.max() < 1e-24:
        return 0.0, 0
    lead = int(np.argmax(mags))
    return math.atan2(vb[lead], va[lead]), lead


def _per_equation(geom: Geometry, Sa, Sb, kappa) -> dict:
    p, q = pq_from_tensors(Sa, Sb)
    out = {
        "t_pq": tpq_matrix(geom.curv, p, q).norm_inf(),
        "w_pq": wpq_matrix(geom.curv, p, q).norm_inf(),
    }
    if geom.exact:
        rp, rq = dpq_matrices(p, q, kappa, geom.conn, geom.L)
        out["d_p"] = rp.norm_inf()
        out["d_q"] = rq.norm_inf()
    r1, r2 = integrability_matrices(geom.curv, p, q)
    out["integrability_1"] = r1.norm_inf()
    out["integrability_2"] = r2.norm_inf()
    return out


def solve(geom: Geometry, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Multi-start damped least squares over the candidate unknowns.

    The rotation gauge is left free during optimization (it only creates
    a flat direction) and normalized after the fact.
    """
    fun = compiled(geom)
    d = geom.n_unknowns
    finals = []
    best = None
    for s in range(cfg.starts):
        rng = np.random.default_rng((cfg.seed, s))
        x0 = rng.uniform(-cfg.init_scale, cfg.init_scale, size=d)
        x, res = _lm_minimize(fun, x0, cfg)
        finals.append((res, s, x))
        if best is None or (res, s) < (best[0], best[1]):
            best = (res, s, x)
    best_res, _, best_x = best

    solved = [f for f in finals if f[0] < cfg.success_threshold]
    orbits: list = []
    for res, s, x in sorted(solved, key=lambda f: (f[0], f[1])):
        Sa, Sb, kappa = geom.unpack(x)
        canda = _normalized_candidate(geom, Sa, Sb, kappa)[0]
        if not any(_orbit_distance_tensors(canda, other) < 1e-6 for other in orbits):
            orbits.append(canda)

    if best_res < cfg.success_threshold:
        status = "Solved"
    elif all(f[0] > cfg.infeasibility_floor for f in finals):
        status = "LikelyInfeasible"
    else:
        status = "Inconclusive"

    Sa, Sb, kappa = geom.unpack(best_x)
    cand, note = _normalized_candidate(geom, Sa, Sb, kappa)
    per_eq = _per_equation(geom, cand.Sa, cand.Sb, cand.kappa if geom.exact else None)
    return SolveResult(
        status=status,
        best_residual=best_res,
        candidate=cand if geom.exact else None,
        gauge_note=note,
        per_equation=per_eq,
        mode="full" if geom.exact else "kappa_free",
        start_residuals=[f[0] for f in finals],
        distinct_orbits=len(orbits),
        raw_solution=best_x,
    )


def _normalized_candidate(geom: Geometry, Sa, Sb, kappa):
    angle, lead = _gauge_angle(Sa, Sb)
    Sa_n, Sb_n = rotate_tensors(Sa, Sb, angle)
    note = f"rotated by s={angle:.12g} so entry {lead} of Sa is nonnegative"
    if kappa is None:
        kappa = Form.zero(geom.L.dim, 1)
    return PSKCandidate(Sa_n, Sb_n, kappa), note


def _orbit_distance_tensors(c1: PSKCandidate, c2: PSKCandidate) -> float:
    va1, vb1 = c1.Sa.to_vector(), c1.Sb.to_vector()
    va2, vb2 = c2.Sa.to_vector(), c2.Sb.to_vector()
    n1 = va1 @ va1 + vb1 @ vb1
    n2 = va2 @ va2 + vb2 @ vb2
    alpha = va1 @ va2 + vb1 @ vb2
    beta = vb1 @ va2 - va1 @ vb2
    best = n1 + n2 - 2.0 * math.hypot(alpha, beta)
    return math.sqrt(max(best, 0.0))


def certify_gauge_orbit(c1: PSKCandidate, c2: PSKCandidate) -> float:
    """min over s of || R_s(c1) - c2 ||; closed form via the two Fourier
    coefficients of the rotation.  The kappa difference is rotation-inert
    and enters squared."""
    tens = _orbit_distance_tensors(c1, c2)
    diff = c1.kappa - c2.kappa
    return math.sqrt(tens ** 2 + _one_form_norm2(diff))


def _one_form_norm2(f: Form) -> float:
    return sum(v * v for v in f.coeffs.values())


@dataclass
class ScanPoint:
    parameter: float
    best_residual: float
    status: str


@dataclass
class ScanResult:
    points: list
    feasible: list
    polished: list

    def as_pairs(self):
        return [(p.parameter, p.best_residual) for p in self.points]


def scan_curvature(family, lo: float, hi: float, steps: int,
                   cfg: SolveConfig = SolveConfig(), *, values=None,
                   polish: bool = True, polish_floor: float = 0.5,
                   polish_tol: float = 1e-9) -> ScanResult:
    """Residual landscape of a one-parameter family of Kahler algebras.

    Grid minima below polish_floor are refined by golden-section search
    on the best-residual function, so feasible parameters need not sit
    on the grid.  Geometries whose Kahler form is not exact fall back to
    the kappa-free stack.
    """
    if values is None:
        if steps < 2 or not (hi > lo):
            raise ValueError("bad scan range")
        values = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
    values = list(values)

    def best_at(param: float) -> tuple:
        L, B = family(param)
        geom = build_geometry(L, B, allow_nonexact=True)
        result = solve(geom, cfg)
        return result.best_residual, result.status

    points = []
    for c in values:
        res, status = best_at(c)
        points.append(ScanPoint(parameter=c, best_residual=res, status=status))

    feasible = [p.parameter for p in points if p.best_residual < cfg.success_threshold]
    polished = []
    if polish and len(values) > 2:
        for i, pt in enumerate(points):
            if pt.best_residual >= polish_floor:
                continue
            left = points[i - 1].best_residual if i > 0 else math.inf
            right = points[i + 1].best_residual if i + 1 < len(points) else math.inf
            if pt.best_residual > min(left, right):
                continue
            a = points[i - 1].parameter if i > 0 else pt.parameter
            b = points[i + 1].parameter if i + 1 < len(points) else pt.parameter
            c_star, r_star = _golden_minimize(lambda c: best_at(c)[0], a, b, polish_tol)
            polished.append((c_star, r_star))
            if r_star < cfg.success_threshold and not any(
                abs(c_star - f) < 1e-6 for f in feasible
            ):
                feasible.append(c_star)
    feasible.sort()
    deduped = []
    for c in feasible:
        if not deduped or abs(c - deduped[-1]) > 1e-6:
            deduped.append(c)
    return ScanResult(points=points, feasible=deduped, polished=polished)


def _golden_minimize(fn, a: float, b: float, xtol: float):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (c, fc) if fc < fd else (d, fd)
