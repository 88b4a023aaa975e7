"""Combinatorial torsion on the circle and on mapping tori, and the relative torsion."""
from dataclasses import dataclass

import numpy as np

from .circle_analytic import (CoEulerStructureS1, EulerStructureS1, Holonomy,
                              analytic_torsion_circle, monodromy)
from .complex_torsion import (GradedBilinearForm, GradedComplex, TorsionValue,
                              is_acyclic, torsion_direct)
from .errors import NotAcyclicError, ValidationError, ZetaPoleError
from .linalg_core import LogProduct, as_matrix, default_tol, is_invertible


def _holonomy_matrix(A):
    return A.A if isinstance(A, Holonomy) else as_matrix(A)


def morse_complex_circle(A):
    """Morse complex of the height function on the circle: ``C^k --(A - 1)--> C^k``.

    The two critical points carry the standard bilinear form, matching the
    Euler structure ``[-d/dtheta, 0]``.
    """
    A = _holonomy_matrix(A)
    k = A.shape[0]
    C = GradedComplex(0, (k, k), (A - np.eye(k),))
    return C, GradedBilinearForm.standard(C.dims)


def theta(A, sigma):
    """``det(holonomy)^sigma``, the character of ``H_1(S^1; Z)``."""
    return complex(np.linalg.det(_holonomy_matrix(A))) ** int(sigma)


def combinatorial_torsion_circle(A, euler=None, basis=None, tol=None):
    """Torsion of the Morse complex times ``theta(sigma)^2``.

    For acyclic holonomy this is ``det(A - 1)^{-2} det(A)^{2 sigma}``. When
    ``1`` is an eigenvalue a cohomology basis of the Morse complex is required.
    """
    euler = EulerStructureS1() if euler is None else euler
    C, b = morse_complex_circle(A)
    if basis is None and not is_acyclic(C, tol):
        raise NotAcyclicError("holonomy has eigenvalue 1; supply a cohomology basis")
    tau = torsion_direct(C, b, basis, tol)
    return TorsionValue(tau.value * theta(A, euler.offset) ** 2, tau.basis)


def poincare_dual_circle(euler):
    """Affine Poincare duality: ``[-d/dtheta, 0] + sigma -> [g, 1/2] + sigma``."""
    return CoEulerStructureS1.base() + euler.offset


@dataclass(frozen=True)
class MappingTorusInput:
    """Action of the monodromy diffeomorphism on ``H^q`` of the fiber, and the
    holonomy ``z`` of the pulled-back line bundle."""

    phi_star: tuple
    z: complex

    def __post_init__(self):
        mats = tuple(as_matrix(P) for P in self.phi_star)
        for q, P in enumerate(mats):
            if P.shape[0] != P.shape[1]:
                raise ValidationError("phi_star_not_square", f"degree {q}")
            if not is_invertible(P):
                raise ValidationError("phi_star_not_invertible", f"degree {q}")
        z = complex(self.z)
        if z == 0:
            raise ValidationError("z_zero", "the holonomy parameter must be nonzero")
        object.__setattr__(self, "phi_star", mats)
        object.__setattr__(self, "z", z)

    def with_z(self, z):
        return MappingTorusInput(self.phi_star, z)


def lefschetz_zeta(inp, tol=None):
    """``prod_q det(1 - z phi*_q)^((-1)^(q+1))``."""
    tol = default_tol() if tol is None else tol
    out = LogProduct()
    for q, P in enumerate(inp.phi_star):
        n = P.shape[0]
        if n == 0:
            continue
        factor = np.eye(n) - inp.z * P
        if not is_invertible(factor, tol):
            raise ZetaPoleError(f"det(1 - z phi*) vanishes in degree {q} at z = {inp.z}")
        out.mul_det(factor, (-1) ** (q + 1))
    return out.value


def supertrace_powers(phi_star, order):
    """``str((phi*)^j)`` for ``j = 1..order``."""
    out = np.zeros(order, dtype=np.complex128)
    for q, P in enumerate(phi_star):
        power = np.eye(P.shape[0], dtype=np.complex128)
        for j in range(order):
            power = power @ P
            out[j] += (-1) ** q * np.trace(power)
    return out


def lefschetz_log_series(phi_star, z, order):
    """Partial sum ``sum_{j<=order} str((phi*)^j) z^j / j`` of ``log zeta``."""
    st = supertrace_powers([as_matrix(P) for P in phi_star], order)
    j = np.arange(1, order + 1)
    return complex(np.sum(st * complex(z) ** j / j))


def mapping_torus_torsion(inp, tol=None):
    """``zeta_phi(z)^2`` for the Euler structure of vector fields lifting
    ``-d/dtheta``; defined when the twisted cohomology vanishes."""
    try:
        zeta = lefschetz_zeta(inp, tol)
    except ZetaPoleError as exc:
        raise NotAcyclicError(str(exc)) from exc
    return TorsionValue(zeta ** 2)


@dataclass(frozen=True)
class RelativeTorsionReport:
    S: complex
    modulus_deviation: float
    unit_deviation: float
    analytic: complex
    combinatorial: complex


def relative_torsion(bundle, euler=None, holonomy=None, tol=None):
    """``S = tau_an(P(e)) / tau_comb(e)`` for an acyclic bundle on the circle."""
    euler = EulerStructureS1() if euler is None else euler
    holonomy = monodromy(bundle) if holonomy is None else holonomy
    comb = combinatorial_torsion_circle(holonomy, euler, tol=tol).value
    an = analytic_torsion_circle(bundle, poincare_dual_circle(euler), holonomy, tol).value
    S = an / comb
    return RelativeTorsionReport(complex(S), abs(abs(S) - 1.0), abs(S - 1.0), complex(an), complex(comb))
