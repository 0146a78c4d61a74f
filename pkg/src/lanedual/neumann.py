"""Inverse Neumann Laplacian on zero-mean data and its constant-shifted
variants.

K solves -Delta(u) = h, d_nu(u) = 0, int(u) = 0 for zero-mean h. The
singular system is regularized by bordering the symmetric stiffness matrix
with the mean constraint (not by pinning a node), which keeps K exactly
self-adjoint in the discrete inner product. K_t adds the unique constant
kappa making int |K_t h|^(t-1) K_t h = 0; that constant is the reason the
dual fixed-point iterates stay zero-mean for free.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

MEAN_TOL = 1e-8


class NonZeroMeanError(ValueError):
    """Compatibility condition int(h) = 0 violated."""


@dataclass
class KtShift:
    t: float
    kappa: float
    residual: float


def signed_power(values, expo, floor=1e-300):
    """|v|^expo * sign(v) with a floor on |v| against signed-zero issues
    for exponents below 1."""
    a = np.maximum(np.abs(values), floor)
    return np.sign(values) * a ** expo


class NeumannSolver:
    """Factorized zero-mean Neumann solver bound to one mesh.

    The factorization is computed once and reused; concurrent solves
    against it are safe (splu.solve does not mutate the factorization).
    """

    def __init__(self, mesh):
        self.mesh = mesh
        A = mesh.stiffness()
        wcol = sp.csc_matrix(mesh.w.reshape(-1, 1))
        B = sp.bmat([[A, wcol], [wcol.T, None]], format="csc")
        self._lu = spla.splu(B)
        self._n = mesh.nnodes

    def solve_K(self, h, check_mean=True):
        """u = K h: -Delta(u) = h weakly, d_nu(u) = 0, int(u) = 0."""
        h = np.ravel(h)
        if check_mean:
            m = abs(self.mesh.integrate(h))
            scale = self.mesh.norm_Ls(h, 1)
            if scale > 0 and m > MEAN_TOL * scale:
                raise NonZeroMeanError(
                    f"int(h) = {m:.3e} exceeds {MEAN_TOL:.0e} * ||h||_1 "
                    f"= {MEAN_TOL * scale:.3e}")
        rhs = np.concatenate([self.mesh.w * h, [0.0]])
        sol = self._lu.solve(rhs)
        return sol[:-1]

    def kappa_shift(self, values, t):
        """Root kappa of the strictly increasing map
        kappa -> int |v + kappa|^(t-1) (v + kappa)."""
        if t <= 0:
            raise ValueError(f"exponent t = {t} must be positive")
        w = self.mesh.w
        values = np.ravel(values)
        if t == 1.0:
            kap = -self.mesh.mean(values)
            res = float(w @ (values + kap))
            return KtShift(t=t, kappa=kap, residual=res)

        def resid(k):
            return float(w @ signed_power(values + k, t))

        lo, hi = -values.max(), -values.min()
        if lo == hi:  # constant field
            return KtShift(t=t, kappa=lo, residual=0.0)
        kap = brentq(resid, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=400)
        # Newton polish; the derivative can blow up for t < 1 at a node
        # where v + kappa = 0, so guard each step.
        for _ in range(2):
            r = resid(kap)
            dr = t * float(w @ np.abs(values + kap) ** (t - 1.0))
            if not np.isfinite(dr) or dr == 0.0:
                break
            step = r / dr
            if not np.isfinite(step) or abs(step) > max(abs(kap), 1.0):
                break
            kap -= step
        return KtShift(t=t, kappa=kap, residual=resid(kap))

    def solve_Kt(self, h, t):
        """K_t h = K h + kappa_t(K h)."""
        u = self.solve_K(h)
        shift = self.kappa_shift(u, t)
        return u + shift.kappa

    # -- spectral helpers ------------------------------------------------
    def first_eigenfunction(self, iters=60, seed=None):
        """First nonconstant Neumann eigenfunction by inverse iteration
        with K (normalized in L2). Returns (eigenvalue, eigenfunction)."""
        mesh = self.mesh
        if seed is None:
            v = mesh.node_r() * np.cos(mesh.node_theta()) + 0.5 * mesh.node_r()
        else:
            v = np.random.default_rng(seed).standard_normal(self._n)
        v = v - mesh.mean(v)
        v /= mesh.norm_Ls(v, 2)
        for _ in range(iters):
            v = self.solve_K(v, check_mean=False)
            v = v - mesh.mean(v)
            v /= mesh.norm_Ls(v, 2)
        lam = mesh.inner(v, mesh.stiffness() @ v / mesh.w)
        # one Rayleigh-quotient refinement pass
        u = self.solve_K(v, check_mean=False)
        lam = mesh.inner(v, v) / mesh.inner(v, u)
        return float(lam), v

    def w2s_seminorm(self, u, s):
        """Discrete W^{2,s} proxy: ||u||_s + ||grad u||_s + ||Delta u||_s."""
        mesh = self.mesh
        gr = mesh.gradient_r(u)
        gt = mesh.gradient_theta(u) / np.maximum(mesh.node_r(), 1e-300)
        grad = np.hypot(gr, gt) if mesh.is_axisym else np.abs(gr)
        lap = mesh.laplacian(u)
        mask = mesh.interior_mask()
        lap_norm = (mesh.w[mask] @ np.abs(lap[mask]) ** s) ** (1.0 / s)
        return mesh.norm_Ls(u, s) + mesh.norm_Ls(grad, s) + float(lap_norm)


def dense_eigenpairs(mesh, k=6):
    """Generalized symmetric eigendecomposition A phi = lambda W phi on a
    coarse mesh (dense; oracle use only). Returns ascending (lams, vecs)."""
    from scipy.linalg import eigh
    A = mesh.stiffness().toarray()
    W = np.diag(mesh.w)
    lams, vecs = eigh(A, W)
    return lams[:k], vecs[:, :k]
