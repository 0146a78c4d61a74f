"""Discretized radially symmetric domains (annulus/ball) in dimension N >= 4.

Grids are 1D radial or 2D axisymmetric (r, theta) reductions; the ambient
dimension enters only through the volume density sigma_{N-2} r^{N-1}
sin^{N-2}(theta) and the face coefficients of the finite-volume operators.

The discretization is finite-volume with node-centered cells:

* quadrature weights are exact cell volumes, so sum(w) is the exact domain
  volume and the divergence identity integrate(laplacian(u)) ==
  boundary_flux(u) holds to roundoff by telescoping;
* the stiffness matrix (weak Laplacian with natural boundary conditions) is
  symmetric with kernel spanned by constants, which the Neumann solver and
  the dual quotient rely on;
* the strong Laplacian adds one-sided second-order wall fluxes on the
  radial boundaries, and the theta-pole rows are automatically regularized
  because the angular density sin^{N-2}(theta) vanishes there.
"""

from dataclasses import dataclass, field
from math import gamma as _gamma, pi

import numpy as np
import scipy.sparse as sp

KINDS = ("radial-annulus", "radial-ball", "axisym-annulus", "axisym-ball")


def unit_ball_volume(N):
    return pi ** (N / 2.0) / _gamma(N / 2.0 + 1.0)


def sphere_area(N):
    """Surface area of the unit sphere S^{N-1} in R^N."""
    return N * unit_ball_volume(N)


def _cell_integrals(faces, dens, ngauss=8):
    """Exact-ish integral of dens over each cell [faces[k], faces[k+1]]."""
    gx, gw = np.polynomial.legendre.leggauss(ngauss)
    a, b = faces[:-1], faces[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    return (half * gw * dens(mid + half * gx)).sum(axis=1)


def _one_sided_deriv_row(x0, x1, x2):
    """Weights of the 3-point one-sided first derivative at x0."""
    c0 = (2 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
    c1 = (x0 - x2) / ((x1 - x0) * (x1 - x2))
    c2 = (x0 - x1) / ((x2 - x0) * (x2 - x1))
    return np.array([c0, c1, c2])


def _stiffness_1d(x, faces, face_coeff):
    """Tridiagonal FV stiffness: faces carry coefficient/dist couplings."""
    n = len(x)
    c = face_coeff / np.diff(x)  # interior faces only, len n-1
    main = np.zeros(n)
    main[:-1] += c
    main[1:] += c
    return sp.diags([-c, main, -c], [-1, 0, 1])


@dataclass
class Mesh:
    kind: str
    N: int
    r0: float
    R: float
    r: np.ndarray                 # radial nodes
    faces_r: np.ndarray           # radial cell faces, len(r)+1
    theta: np.ndarray | None      # polar-angle nodes (axisym kinds)
    faces_theta: np.ndarray | None
    w: np.ndarray                 # quadrature weights, flattened C-order (r slow)
    cell_centered: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    # -- basic geometry -------------------------------------------------
    @property
    def nr(self):
        return len(self.r)

    @property
    def ntheta(self):
        return len(self.theta) if self.theta is not None else 1

    @property
    def is_axisym(self):
        return self.theta is not None

    @property
    def nnodes(self):
        return self.nr * self.ntheta

    @property
    def volume(self):
        return float(self.w.sum())

    def node_r(self):
        """Radial coordinate of every node (flattened)."""
        if self.is_axisym:
            return np.repeat(self.r, self.ntheta)
        return self.r

    def node_theta(self):
        if self.is_axisym:
            return np.tile(self.theta, self.nr)
        return np.zeros_like(self.r)

    def reshape(self, values):
        """View a flattened field as (nr, ntheta) for axisym meshes."""
        if not self.is_axisym:
            return np.asarray(values)
        return np.asarray(values).reshape(self.nr, self.ntheta)

    def boundary_masks(self):
        """(inner, outer) boolean masks over flattened nodes at r=r0, r=R."""
        inner = np.zeros(self.nnodes, dtype=bool)
        outer = np.zeros(self.nnodes, dtype=bool)
        if not self.cell_centered:
            if self.is_axisym:
                if self.r0 > 0.0:
                    inner[: self.ntheta] = True
                outer[-self.ntheta:] = True
            else:
                if self.r0 > 0.0:
                    inner[0] = True
                outer[-1] = True
        return inner, outer

    def interior_mask(self):
        inner, outer = self.boundary_masks()
        return ~(inner | outer)

    # -- quadrature -----------------------------------------------------
    def integrate(self, u):
        return float(self.w @ np.ravel(u))

    def mean(self, u):
        return self.integrate(u) / self.volume

    def norm_Ls(self, u, s):
        if s < 1:
            raise ValueError(f"Lebesgue exponent s = {s} must be >= 1")
        return float((self.w @ np.abs(np.ravel(u)) ** s) ** (1.0 / s))

    def inner(self, u, v):
        return float(self.w @ (np.ravel(u) * np.ravel(v)))

    # -- operators ------------------------------------------------------
    def stiffness(self):
        """Symmetric weak Laplacian A with natural (Neumann) BCs.

        u^T A v discretizes the Dirichlet form int grad(u).grad(v); A has
        zero row sums (constants in the kernel).
        """
        if "A" not in self._cache:
            self._cache["A"] = self._build_stiffness().tocsc()
        return self._cache["A"]

    def _build_stiffness(self):
        N = self.N
        if not self.is_axisym:
            coeff = sphere_area(N) * self.faces_r[1:-1] ** (N - 1)
            return _stiffness_1d(self.r, self.faces_r, coeff)
        s = sphere_area(N - 1)
        wr = _cell_integrals(self.faces_r, lambda x: x ** (N - 1.0))
        wr3 = _cell_integrals(self.faces_r, lambda x: x ** (N - 3.0))
        wt = _cell_integrals(self.faces_theta, lambda x: np.sin(x) ** (N - 2.0))
        Ar = _stiffness_1d(self.r, self.faces_r, self.faces_r[1:-1] ** (N - 1.0))
        At = _stiffness_1d(self.theta, self.faces_theta,
                           np.sin(self.faces_theta[1:-1]) ** (N - 2.0))
        return s * (sp.kron(Ar, sp.diags(wt)) + sp.kron(sp.diags(wr3), At))

    def _wall_flux_matrix(self):
        """Sparse operator returning one-sided wall fluxes (outer minus not;
        signed as d/dr so that sum(w * laplacian(u)) telescopes exactly)."""
        if "wall" in self._cache:
            return self._cache["wall"]
        n = self.nnodes
        M = sp.lil_matrix((n, n))
        if not self.cell_centered and self.nr >= 3:
            N = self.N
            r = self.r
            row_out = _one_sided_deriv_row(r[-1], r[-2], r[-3])
            row_in = _one_sided_deriv_row(r[0], r[1], r[2])
            if self.is_axisym:
                s = sphere_area(N - 1)
                wt = _cell_integrals(self.faces_theta,
                                     lambda x: np.sin(x) ** (N - 2.0))
                nt = self.ntheta
                for j in range(nt):
                    base = (self.nr - 1) * nt + j
                    cO = s * wt[j] * self.R ** (N - 1)
                    for k, ck in enumerate(row_out):
                        M[base, (self.nr - 1 - k) * nt + j] = cO * ck
                    if self.r0 > 0.0:
                        cI = s * wt[j] * self.r0 ** (N - 1)
                        for k, ck in enumerate(row_in):
                            M[j, k * nt + j] = cI * ck
            else:
                cO = sphere_area(N) * self.R ** (N - 1)
                M[-1, [-1, -2, -3]] = cO * row_out
                if self.r0 > 0.0:
                    cI = sphere_area(N) * self.r0 ** (N - 1)
                    M[0, [0, 1, 2]] = cI * row_in
        self._cache["wall"] = M.tocsr()
        return self._cache["wall"]

    def laplacian(self, u):
        """Strong discrete Laplacian of a nodal field (all rows Delta-valued).

        Interior rows are the second-order FV stencil; radial wall rows close
        the cell balance with the one-sided second-order wall derivative, so
        the discrete divergence identity is exact.
        """
        u = np.ravel(u)
        flux_div = -self.stiffness() @ u
        wall = self._wall_flux_matrix() @ u
        # outer wall adds +flux, inner wall subtracts (outward at r0 is -r^)
        sgn = np.ones(self.nnodes)
        inner, _ = self.boundary_masks()
        sgn[inner] = -1.0
        return (flux_div + sgn * wall) / self.w

    def normal_derivative(self, u):
        """One-sided second-order d_nu(u) at every boundary node (flattened,
        zero elsewhere)."""
        u = np.ravel(u)
        out = np.zeros(self.nnodes)
        if self.cell_centered or self.nr < 3:
            return out
        r = self.r
        row_out = _one_sided_deriv_row(r[-1], r[-2], r[-3])
        row_in = _one_sided_deriv_row(r[0], r[1], r[2])
        U = self.reshape(u)
        if self.is_axisym:
            out = out.reshape(self.nr, self.ntheta)
            out[-1] = row_out[0] * U[-1] + row_out[1] * U[-2] + row_out[2] * U[-3]
            if self.r0 > 0.0:
                out[0] = -(row_in[0] * U[0] + row_in[1] * U[1] + row_in[2] * U[2])
            return out.ravel()
        out[-1] = row_out @ u[[-1, -2, -3]]
        if self.r0 > 0.0:
            out[0] = -(row_in @ u[[0, 1, 2]])
        return out

    def boundary_flux(self, u):
        """Discrete integral of d_nu(u) over the boundary, compatible with
        laplacian() so that integrate(laplacian(u)) == boundary_flux(u)."""
        u = np.ravel(u)
        wall = self._wall_flux_matrix() @ u
        inner, outer = self.boundary_masks()
        return float(wall[outer].sum() - wall[inner].sum())

    def boundary_quadrature_outer(self):
        """Surface-measure weights on the outer boundary nodes (axisym)."""
        N = self.N
        if self.is_axisym:
            wt = _cell_integrals(self.faces_theta, lambda x: np.sin(x) ** (N - 2.0))
            return sphere_area(N - 1) * self.R ** (N - 1) * wt
        return np.array([sphere_area(N) * self.R ** (N - 1)])

    def gradient_r(self, u):
        """Central-difference radial derivative (one-sided at the ends)."""
        U = self.reshape(np.ravel(u))
        if self.is_axisym:
            return np.ravel(np.gradient(U, self.r, axis=0))
        return np.gradient(U, self.r)

    def gradient_theta(self, u):
        if not self.is_axisym:
            return np.zeros(self.nnodes)
        U = self.reshape(np.ravel(u))
        return np.ravel(np.gradient(U, self.theta, axis=1))


class Field:
    """Grid function on a mesh with lazily cached L^s norms."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != mesh.nnodes:
            raise ValueError(f"field has {values.size} values, mesh has "
                             f"{mesh.nnodes} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.mesh = mesh
        self._values = values
        self._norms = {}

    @property
    def values(self):
        return self._values

    @values.setter
    def values(self, new):
        new = np.asarray(new, dtype=float).ravel()
        if not np.all(np.isfinite(new)):
            raise ValueError("field contains non-finite values")
        self._values = new
        self._norms.clear()

    def norm(self, s):
        if s not in self._norms:
            self._norms[s] = self.mesh.norm_Ls(self._values, s)
        return self._norms[s]

    def integral(self):
        return self.mesh.integrate(self._values)


def _radial_nodes(r0, R, nr, spacing, grade):
    if spacing == "uniform":
        r = np.linspace(r0, R, nr)
        faces = np.concatenate([[r0], 0.5 * (r[1:] + r[:-1]), [R]])
        return r, faces, False
    if spacing == "boundary":
        # cluster nodes toward r = R with power `grade`
        t = np.linspace(0.0, 1.0, nr)
        r = R - (R - r0) * (1.0 - t) ** grade
        r[0], r[-1] = r0, R
        faces = np.concatenate([[r0], 0.5 * (r[1:] + r[:-1]), [R]])
        return r, faces, False
    if spacing == "equal-volume":
        # cell-centered: n cells of identical N-volume, nodes at centroids
        raise ValueError("equal-volume spacing requires build_equal_volume()")
    raise ValueError(f"unknown radial spacing {spacing!r}")


def build(kind, N, r0, R, nr, ntheta=None, theta_grading=1.0,
          radial_spacing="uniform", radial_grade=2.0):
    """Build a mesh of the given kind.

    kind is one of radial-annulus, radial-ball, axisym-annulus, axisym-ball.
    nr >= 64 radial nodes (ntheta >= 32 for axisym kinds); balls have r0=0.
    theta_grading > 1 clusters angular nodes toward theta=0 (the north pole),
    radial_spacing="boundary" clusters radial nodes toward r=R.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown mesh kind {kind!r}")
    N = int(N)
    if N < 4:
        raise ValueError(f"ambient dimension N = {N} must be >= 4")
    is_ball = kind.endswith("ball")
    if is_ball:
        if r0 != 0.0:
            raise ValueError("ball meshes require r0 = 0")
    elif not 0.0 < r0 < R:
        raise ValueError(f"annulus radii must satisfy 0 < r0 < R, got "
                         f"({r0}, {R})")
    if R <= r0:
        raise ValueError("degenerate radii")
    if nr < 64:
        raise ValueError(f"nr = {nr} under-resolved (need >= 64)")
    axisym = kind.startswith("axisym")
    if axisym and (ntheta is None or ntheta < 32):
        raise ValueError(f"ntheta = {ntheta} under-resolved (need >= 32)")

    r, faces_r, _ = _radial_nodes(r0, R, nr, radial_spacing, radial_grade)
    if axisym:
        if theta_grading == 1.0:
            th = np.linspace(0.0, pi, ntheta)
        else:
            th = pi * np.linspace(0.0, 1.0, ntheta) ** theta_grading
            th[-1] = pi
        faces_t = np.concatenate([[0.0], 0.5 * (th[1:] + th[:-1]), [pi]])
        wr = _cell_integrals(faces_r, lambda x: x ** (N - 1.0))
        wt = _cell_integrals(faces_t, lambda x: np.sin(x) ** (N - 2.0))
        w = sphere_area(N - 1) * np.kron(wr, wt)
        return Mesh(kind, N, r0, R, r, faces_r, th, faces_t, w)
    wr = _cell_integrals(faces_r, lambda x: x ** (N - 1.0))
    w = sphere_area(N) * wr
    return Mesh(kind, N, r0, R, r, faces_r, None, None, w)


def build_equal_volume(N, r0, R, n):
    """Cell-centered radial mesh whose n cells have identical N-volume.

    Every node carries exactly the same quadrature weight, which makes
    rearrangement-type transforms pure permutations of node values.
    """
    N = int(N)
    if not 0.0 <= r0 < R:
        raise ValueError(f"bad radii ({r0}, {R})")
    if n < 8:
        raise ValueError("need at least 8 cells")
    vols = np.linspace(r0 ** N, R ** N, n + 1)
    faces = vols ** (1.0 / N)
    # volume centroid of each cell
    r = (0.5 * (vols[:-1] + vols[1:])) ** (1.0 / N)
    w = np.full(n, sphere_area(N) / N * (R ** N - r0 ** N) / n)
    kind = "radial-ball" if r0 == 0.0 else "radial-annulus"
    return Mesh(kind, N, r0, R, r, faces, None, None, w, cell_centered=True)
