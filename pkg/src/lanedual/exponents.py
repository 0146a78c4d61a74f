"""Exponent algebra on the critical hyperbola 1/(p+1) + 1/(q+1) = (N-2)/N.

Every other module takes an :class:`ExponentPack` rather than raw (p, q, N)
so the dual weights and scaling exponents are computed in exactly one place.
"""

from dataclasses import dataclass

HYPERBOLA_TOL = 1e-10
IDENTITY_TOL = 1e-12


class OffHyperbolaError(ValueError):
    """Raised when (p, q, N) does not lie on the critical hyperbola."""

    def __init__(self, p, q, N, residual):
        self.residual = residual
        super().__init__(
            f"(p={p}, q={q}, N={N}) is off the critical hyperbola: "
            f"|1/(p+1)+1/(q+1)-(N-2)/N| = {residual:.3e} > {HYPERBOLA_TOL:.0e}"
        )


@dataclass(frozen=True)
class ExponentPack:
    """A point on the critical hyperbola with all derived dual constants.

    alpha, beta are the dual Lebesgue exponents (p+1)/p and (q+1)/q;
    gamma1, gamma2, gamma the dual weights with gamma1 + gamma2 = 1 and
    1/alpha + 1/beta = 1/gamma; sp = N/(p+1), sq = N/(q+1) the bubble
    scaling exponents.
    """

    p: float
    q: float
    N: int
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    gamma: float
    sp: float
    sq: float

    def __post_init__(self):
        res = hyperbola_residual(self.p, self.q, self.N)
        if res > HYPERBOLA_TOL:
            raise OffHyperbolaError(self.p, self.q, self.N, res)
        if self.p * self.q <= 1.0:
            raise ValueError(f"pq = {self.p * self.q} must exceed 1")

    @property
    def threshold_exponent(self):
        """(p+1)(q+1)/(pq-1), which equals N/2 on the hyperbola."""
        return (self.p + 1.0) * (self.q + 1.0) / (self.p * self.q - 1.0)

    def swap(self):
        """The pack with the roles of p and q exchanged."""
        return derived_constants(self.q, self.p, self.N)


def hyperbola_residual(p, q, N):
    return abs(1.0 / (p + 1.0) + 1.0 / (q + 1.0) - (N - 2.0) / N)


def hyperbola_partner(p, N):
    """Closed-form partner exponent q with (p, q) on the critical hyperbola.

    Requires p > 2/(N-2) so the partner is positive and finite, and N >= 4.
    """
    if N < 4 or int(N) != N:
        raise ValueError(f"dimension N = {N} must be an integer >= 4")
    if p <= 2.0 / (N - 2.0):
        raise ValueError(
            f"p = {p} <= 2/(N-2) = {2.0 / (N - 2.0):.6g}: partner exponent "
            "would be nonpositive or infinite"
        )
    return 1.0 / ((N - 2.0) / N - 1.0 / (p + 1.0)) - 1.0


SNAP_TOL = 1e-6


def derived_constants(p, q, N, snap=False):
    """Build the :class:`ExponentPack` for a hyperbola point.

    With ``snap=True``, q is recomputed from p in closed form so that
    accumulated drift (up to 1e-6) does not trip the membership tolerance;
    genuinely off-hyperbola input is still rejected with the measured
    residual.
    """
    N = int(N)
    if snap:
        if hyperbola_residual(p, q, N) > SNAP_TOL:
            raise OffHyperbolaError(p, q, N, hyperbola_residual(p, q, N))
        q = hyperbola_partner(p, N)
    res = hyperbola_residual(p, q, N)
    if res > HYPERBOLA_TOL:
        raise OffHyperbolaError(p, q, N, res)
    alpha = (p + 1.0) / p
    beta = (q + 1.0) / q
    denom = alpha + beta
    gamma1 = beta / denom
    gamma2 = alpha / denom
    gamma = gamma1 * alpha
    return ExponentPack(
        p=p, q=q, N=N, alpha=alpha, beta=beta,
        gamma1=gamma1, gamma2=gamma2, gamma=gamma,
        sp=N / (p + 1.0), sq=N / (q + 1.0),
    )


def pack_from_p(p, N):
    """Convenience: snap q from p and build the pack."""
    return derived_constants(p, hyperbola_partner(p, N), N)


def admissibility(p, q, N):
    """Classify a hyperbola point against the existence conditions.

    Returns a (label, condition) pair where label is one of
    ``covered-by-main-thm``, ``biharmonic-window``, ``uncovered``. The
    classifier never reports nonexistence: points outside the known
    conditions are simply ``uncovered``.
    """
    res = hyperbola_residual(p, q, N)
    if res > HYPERBOLA_TOL:
        raise OffHyperbolaError(p, q, N, res)
    lo = min(p, q)
    if N >= 6:
        bound = (N + 2.0) / (2.0 * (N - 2.0))
        cond = f"(i) N>=6, p,q > (N+2)/(2(N-2)) = {bound:.6g}"
    elif N == 5:
        bound = 17.0 / 13.0
        cond = "(ii) N=5, p,q > 17/13"
    else:
        bound = 7.0 / 3.0
        cond = "(iii) N=4, p,q > 7/3"
    if lo > bound:
        return "covered-by-main-thm", cond
    if N >= 5 and abs(lo - 1.0) <= HYPERBOLA_TOL:
        return "biharmonic-window", f"N={N}>=5, min(p,q)=1"
    return "uncovered", f"min(p,q) = {lo:.6g} <= {bound:.6g} fails {cond}"
