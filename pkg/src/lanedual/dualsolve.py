"""Maximization of the dual quotient and recovery of least-energy nodal
solutions.

The quotient Q(f, g) = int(f K g) / (||f||_alpha ||g||_beta) is maximized
by a damped fixed-point sweep derived from the stationarity relations
K_p g = D |f|^(1/p-1) f, K_q f = D |g|^(1/q-1) g: each half-step applies
K_t, takes the signed power, and renormalizes. The product normalization
is used inside the iteration because it is invariant under independent
rescaling of f and g; zero mean is automatic because int |K_t h|^(t-1)
K_t h = 0 by construction of the constant shift. A step is accepted only
if the quotient does not decrease; otherwise the damping factor is halved
and the blend retried.
"""

from dataclasses import dataclass, field

import numpy as np

from .neumann import NeumannSolver, signed_power


@dataclass
class IterationTrace:
    iterations: list = field(default_factory=list)  # (sweep, Q, tau)
    converged: bool = False
    el_residual: float = np.inf

    def as_rows(self):
        return [(i, q, t) for (i, q, t) in self.iterations]


@dataclass
class DualReport:
    pack: object
    mesh_descr: dict
    D: float
    f: np.ndarray
    g: np.ndarray
    converged: bool
    el_residual: float
    restarts: list                      # per-restart best quotients
    near_optimal: list                  # restart indices within 1e-8 of best
    traces: list
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    residual_u: float = np.nan
    residual_v: float = np.nan
    energy: float = np.nan
    c_pred: float = np.nan
    threshold: float = np.nan
    compat_u: float = np.nan
    compat_v: float = np.nan
    pointwise_mismatch: float = np.nan
    u_nodal: bool = False
    v_nodal: bool = False

    def summary(self):
        out = {
            "p": self.pack.p, "q": self.pack.q, "N": self.pack.N,
            "mesh": self.mesh_descr,
            "D": self.D,
            "converged": self.converged,
            "el_residual": self.el_residual,
            "restart_optima": self.restarts,
            "near_optimal_restarts": self.near_optimal,
            "energy": self.energy,
            "c_pred": self.c_pred,
            "energy_rel_error": (abs(self.energy - self.c_pred)
                                 / abs(self.energy)
                                 if np.isfinite(self.energy) else None),
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
            "compat_u": self.compat_u,
            "compat_v": self.compat_v,
            "pointwise_mismatch": self.pointwise_mismatch,
            "u_nodal": self.u_nodal,
            "v_nodal": self.v_nodal,
        }
        if np.isfinite(self.threshold):
            out["threshold"] = self.threshold
            out["threshold_margin"] = self.D / self.threshold - 1.0
        return out


class ConvergenceError(RuntimeError):
    def __init__(self, msg, traces=None):
        super().__init__(msg)
        self.traces = traces or []


def rayleigh_ratio(solver, f, g, pack):
    """int(f K g) / (||f||_alpha ||g||_beta); scale invariant and symmetric."""
    mesh = solver.mesh
    nf = mesh.norm_Ls(f, pack.alpha)
    ng = mesh.norm_Ls(g, pack.beta)
    if nf == 0.0 or ng == 0.0:
        raise ValueError("rayleigh_ratio called with a zero field")
    return mesh.inner(f, solver.solve_K(g, check_mean=False)) / (nf * ng)


def _sweep(solver, pack, f, g):
    fn = signed_power(solver.solve_Kt(g, pack.p), pack.p)
    fn /= solver.mesh.norm_Ls(fn, pack.alpha)
    gn = signed_power(solver.solve_Kt(fn, pack.q), pack.q)
    gn /= solver.mesh.norm_Ls(gn, pack.beta)
    return fn, gn


def _el_residual(solver, pack, f, g, Q):
    lhs = solver.solve_Kt(g, pack.p)
    rhs = Q * signed_power(f, 1.0 / pack.p)
    return solver.mesh.norm_Ls(lhs - rhs, pack.p + 1.0) / Q


def _fixed_point(solver, pack, f0, g0, max_iter, tol, el_tol):
    mesh = solver.mesh
    f = np.array(f0, dtype=float)
    g = np.array(g0, dtype=float)
    f -= mesh.mean(f)
    g -= mesh.mean(g)
    f /= mesh.norm_Ls(f, pack.alpha)
    g /= mesh.norm_Ls(g, pack.beta)
    Q = mesh.inner(f, solver.solve_K(g, check_mean=False))
    trace = IterationTrace()
    tau, accepted, stable = 1.0, 0, 0
    # accept slack sits above the roundoff noise of the quotient so that
    # machine-converged iterates are not spuriously rejected
    slack = 1e-12
    for sweep in range(max_iter):
        fn, gn = _sweep(solver, pack, f, g)
        if tau < 1.0:
            fn = (1.0 - tau) * f + tau * fn
            fn /= mesh.norm_Ls(fn, pack.alpha)
            gn = (1.0 - tau) * g + tau * gn
            gn /= mesh.norm_Ls(gn, pack.beta)
        Qn = mesh.inner(fn, solver.solve_K(gn, check_mean=False))
        if Qn >= Q * (1.0 - slack):
            dq = abs(Qn - Q)
            f, g, Q = fn, gn, Qn
            trace.iterations.append((sweep, Q, tau))
            accepted += 1
            if accepted >= 3:
                tau, accepted = 1.0, 0
            stable = stable + 1 if dq <= tol * abs(Q) else 0
            if stable >= 5:
                el = _el_residual(solver, pack, f, g, Q)
                if el <= el_tol:
                    trace.converged = True
                    trace.el_residual = el
                    break
                stable = 0
        else:
            tau *= 0.5
            accepted = 0
            if tau < 1e-14:
                break
    if not trace.converged:
        # a damping death at the noise floor is still a solution if the
        # stationarity relations hold
        el = _el_residual(solver, pack, f, g, Q)
        trace.el_residual = el
        trace.converged = el <= el_tol
    return Q, f, g, trace


def _init_menu(solver, pack, restarts, seed, extra_inits, star_symmetrize):
    """Initialization menu: eigenfunction pair, random smooth noise, and
    (radial meshes) flip-&-rearrange symmetrized noise."""
    mesh = solver.mesh
    rng = np.random.default_rng(seed)
    inits = []
    _, phi = solver.first_eigenfunction()
    inits.append(("eigenfunction", phi.copy(), phi.copy()))
    for k in range(max(0, restarts - len(inits) - len(extra_inits))):
        f = solver.solve_K(_demeaned_noise(mesh, rng), check_mean=False)
        g = solver.solve_K(_demeaned_noise(mesh, rng), check_mean=False)
        f -= mesh.mean(f)
        g -= mesh.mean(g)
        if star_symmetrize and not mesh.is_axisym and k % 2 == 1:
            from .symmetry import RadialProfile
            f = RadialProfile(mesh, f).star_transform().h
            g = RadialProfile(mesh, g).star_transform().h
            inits.append((f"star-noise-{k}", f, g))
        else:
            inits.append((f"noise-{k}", f, g))
    for j, (f, g) in enumerate(extra_inits):
        inits.append((f"user-{j}", np.asarray(f, float), np.asarray(g, float)))
    return inits


def _demeaned_noise(mesh, rng):
    h = rng.standard_normal(mesh.nnodes)
    return h - mesh.mean(h)


def maximize_D(solver_or_mesh, pack, restarts=8, max_iter=4000, tol=1e-10,
               el_tol=1e-8, seed=0, extra_inits=(), S=None, jobs=1):
    """Best dual quotient over the restart menu; returns a DualReport.

    extra_inits is a sequence of (f0, g0) pairs appended to the menu (used
    e.g. to lift a radial optimum into an axisymmetric run). S, when given,
    fills the compactness threshold 2^(2/N)/S for the report.
    """
    solver = (solver_or_mesh if isinstance(solver_or_mesh, NeumannSolver)
              else NeumannSolver(solver_or_mesh))
    mesh = solver.mesh
    inits = _init_menu(solver, pack, restarts, seed, list(extra_inits),
                       star_symmetrize=True)
    results = []

    def run_one(item):
        name, f0, g0 = item
        Q, f, g, trace = _fixed_point(solver, pack, f0, g0, max_iter, tol,
                                      el_tol)
        return name, Q, f, g, trace

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_one, inits))
    else:
        results = [run_one(item) for item in inits]

    converged = [res for res in results if res[4].converged]
    if not converged:
        raise ConvergenceError(
            f"no restart converged on {mesh.kind} for (p,q,N)=({pack.p},"
            f"{pack.q},{pack.N})", traces=[r[4] for r in results])
    best = max(converged, key=lambda res: res[1])
    Dbest = best[1]
    near = [res[0] for res in converged if abs(res[1] - Dbest) <= 1e-8 * Dbest]
    report = DualReport(
        pack=pack,
        mesh_descr={"kind": mesh.kind, "N": mesh.N, "r0": mesh.r0,
                    "R": mesh.R, "nr": mesh.nr, "ntheta": mesh.ntheta},
        D=Dbest, f=best[2], g=best[3],
        converged=True, el_residual=best[4].el_residual,
        restarts=[(res[0], res[1], res[4].converged) for res in results],
        near_optimal=near,
        traces=[res[4] for res in results],
        threshold=(2.0 ** (2.0 / pack.N) / S) if S else np.nan,
    )
    recover_solution(solver, report)
    return report


def maximize_D_radial(solver_or_mesh, pack, **kw):
    """maximize_D restricted to a 1D radial mesh (reports D_rad)."""
    solver = (solver_or_mesh if isinstance(solver_or_mesh, NeumannSolver)
              else NeumannSolver(solver_or_mesh))
    if solver.mesh.is_axisym:
        raise ValueError("maximize_D_radial needs a radial (1D) mesh")
    return maximize_D(solver, pack, **kw)


def recover_solution(solver, report):
    """Populate (u, v), PDE residuals, energy and compatibility checks.

    u = D^(-q(p+1)/(pq-1)) K_p g and v = D^(-p(q+1)/(pq-1)) K_q f; the
    pointwise route u = D^(-(q+1)/(pq-1)) |f|^(1/p-1) f must agree at the
    optimum and the mismatch is recorded.
    """
    pack, mesh = report.pack, solver.mesh
    p, q = pack.p, pack.q
    D = report.D
    s_f = -p * (q + 1.0) / (p * q - 1.0)
    t_g = -q * (p + 1.0) / (p * q - 1.0)
    f_t = D ** s_f * report.f
    g_t = D ** t_g * report.g
    u = solver.solve_Kt(g_t, p)
    v = solver.solve_Kt(f_t, q)
    u_pt = D ** (-(q + 1.0) / (p * q - 1.0)) * signed_power(report.f, 1.0 / p)
    report.pointwise_mismatch = float(
        np.max(np.abs(u - u_pt)) / np.max(np.abs(u)))
    interior = mesh.interior_mask()
    src_v = signed_power(v, q)
    src_u = signed_power(u, p)
    lap_u = mesh.laplacian(u)
    lap_v = mesh.laplacian(v)
    report.residual_u = float(np.max(np.abs((lap_u + src_v)[interior]))
                              / np.max(np.abs(src_v)))
    report.residual_v = float(np.max(np.abs((lap_v + src_u)[interior]))
                              / np.max(np.abs(src_u)))
    report.u, report.v = u, v
    report.energy = energy(mesh, u, v, pack)
    report.c_pred = (2.0 / pack.N) * D ** (-pack.N / 2.0)
    scale_u = mesh.norm_Ls(src_u, 1.0)
    scale_v = mesh.norm_Ls(src_v, 1.0)
    report.compat_u = float(abs(mesh.integrate(src_u)) / scale_u)
    report.compat_v = float(abs(mesh.integrate(src_v)) / scale_v)
    report.u_nodal = bool(np.any(u > 0) and np.any(u < 0))
    report.v_nodal = bool(np.any(v > 0) and np.any(v < 0))
    return u, v, (report.residual_u, report.residual_v)


def energy(mesh, u, v, pack):
    """I(u,v) = int grad(u).grad(v) - ||u||^{p+1}/(p+1) - ||v||^{q+1}/(q+1).

    The cross term is the discrete Dirichlet form u^T A v (the same
    bilinear form the Neumann solve uses), so the dual energy identity
    holds to solver precision rather than to mesh truncation error.
    """
    u = np.ravel(u)
    v = np.ravel(v)
    cross = float(u @ (mesh.stiffness() @ v))
    return (cross
            - mesh.norm_Ls(u, pack.p + 1) ** (pack.p + 1) / (pack.p + 1)
            - mesh.norm_Ls(v, pack.q + 1) ** (pack.q + 1) / (pack.q + 1))


def radial_monotonicity_fraction(mesh, u, v):
    """Fraction of interior nodes where u_r v_r > 0 (radial meshes)."""
    du = mesh.gradient_r(u)
    dv = mesh.gradient_r(v)
    prod = (du * dv)[mesh.interior_mask()]
    return float(np.mean(prod > 0))
