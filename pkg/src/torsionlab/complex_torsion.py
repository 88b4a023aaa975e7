"""Torsion of finite-dimensional complexes carrying symmetric bilinear forms.

A complex is stored by its lowest degree, the dimensions ``n_q`` and the
differential matrices ``D_q : C^q -> C^{q+1}``. Degrees keep their absolute
labels in every sign and weight, so shifting a complex by one degree inverts
its torsion.

Two independent routes are provided:

* :func:`torsion_direct` evaluates the form induced on ``det H`` through the
  determinant-line isomorphism (Milnor's based-complex torsion).
* :func:`torsion_spectral` splits the complex along generalized eigenspaces of
  the Laplacian inside/outside a circle and multiplies the torsion of the small
  part by determinants of the Laplacian on the rest.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (ContourOnSpectrumError, NotAComplexError, NotAcyclicError,
                     SingularFormError, ValidationError)
from .linalg_core import (LogProduct, as_matrix, column_space,
                          default_tol, generalized_eigenspaces, rank_kernel,
                          spectral_scale)

FORM_CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class GradedComplex:
    degree_min: int
    dims: tuple
    differentials: tuple
    tol: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if any(n < 0 for n in dims):
            raise ValueError("dimensions must be non-negative")
        if len(self.differentials) != max(len(dims) - 1, 0):
            raise ValueError(f"{len(dims)} degrees need {max(len(dims) - 1, 0)} differentials, "
                             f"got {len(self.differentials)}")
        diffs = tuple(as_matrix(D, dims[i + 1], dims[i]) for i, D in enumerate(self.differentials))
        for D in diffs:
            D.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "differentials", diffs)
        self.check(self.tol)

    @classmethod
    def two_term(cls, A, degree=0):
        """``C^n --A--> C^n`` concentrated in degrees ``degree, degree+1``."""
        A = as_matrix(A)
        return cls(degree, (A.shape[1], A.shape[0]), (A,))

    @property
    def degrees(self):
        return range(self.degree_min, self.degree_min + len(self.dims))

    @property
    def degree_max(self):
        return self.degree_min + len(self.dims) - 1

    def dim(self, q):
        i = q - self.degree_min
        return self.dims[i] if 0 <= i < len(self.dims) else 0

    def d(self, q):
        """Matrix of ``d : C^q -> C^{q+1}``; zero outside the stored range."""
        i = q - self.degree_min
        if 0 <= i < len(self.differentials):
            return self.differentials[i]
        return np.zeros((self.dim(q + 1), self.dim(q)), dtype=np.complex128)

    def check(self, tol=None):
        """Raise unless ``d d = 0``; return the largest relative residual."""
        tol = default_tol() if tol is None else tol
        worst = 0.0
        for q in self.degrees:
            lo, hi = self.d(q), self.d(q + 1)
            if lo.size == 0 or hi.size == 0:
                continue
            scale = np.linalg.norm(hi, 2) * np.linalg.norm(lo, 2)
            if scale == 0:
                continue
            resid = np.linalg.norm(hi @ lo, 2) / scale
            if resid > tol:
                raise NotAComplexError(q, resid)
            worst = max(worst, resid)
        return worst


@dataclass(frozen=True)
class GradedBilinearForm:
    """Per-degree complex symmetric (``B = B^t``, no conjugation) Gram matrices."""

    grams: tuple
    tol: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        tol = default_tol() if self.tol is None else self.tol
        grams = tuple(as_matrix(B) for B in self.grams)
        for i, B in enumerate(grams):
            if B.shape[0] != B.shape[1]:
                raise ValueError(f"Gram matrix {i} is not square")
            if B.shape[0] == 0:
                continue
            norm = np.linalg.norm(B, 2)
            if np.linalg.norm(B - B.T, 2) > tol * norm:
                raise ValidationError("b_not_symmetric", f"Gram matrix at position {i}")
            s = np.linalg.svd(B, compute_uv=False)
            if not s[-1] > tol * s[0]:
                raise SingularFormError(f"Gram matrix at position {i} is not invertible")
            B.setflags(write=False)
        object.__setattr__(self, "grams", grams)

    @classmethod
    def standard(cls, dims):
        return cls(tuple(np.eye(n, dtype=np.complex128) for n in dims))

    def compatible(self, C):
        if tuple(B.shape[0] for B in self.grams) != C.dims:
            raise ValueError(f"bilinear form dims {[B.shape[0] for B in self.grams]} "
                             f"do not match complex dims {list(C.dims)}")

    def gram(self, C, q):
        i = q - C.degree_min
        return self.grams[i] if 0 <= i < len(self.grams) else np.zeros((0, 0), dtype=np.complex128)


@dataclass(frozen=True)
class CohomologyBasis:
    """Cocycle representatives (as columns) per degree, starting at ``degree_min``."""

    degree_min: int
    vectors: tuple

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(np.asarray(v, dtype=np.complex128) for v in self.vectors))

    def at(self, q):
        i = q - self.degree_min
        return self.vectors[i]

    @property
    def betti(self):
        return tuple(v.shape[1] for v in self.vectors)

    @property
    def is_empty(self):
        return sum(self.betti) == 0

    def descriptor(self):
        if self.is_empty:
            return "canonical-unit"
        return {
            "degree_min": self.degree_min,
            "betti": list(self.betti),
            "vectors": [[[[float(x.real), float(x.imag)] for x in col] for col in v.T] for v in self.vectors],
        }


@dataclass(frozen=True)
class TorsionValue:
    """A nonzero complex number together with the cohomology basis it refers to.

    ``basis`` is ``None`` for acyclic complexes (the canonical unit of
    ``det H = C``).
    """

    value: complex
    basis: CohomologyBasis = None

    def __post_init__(self):
        if self.value == 0:
            raise ValueError("torsion value must be nonzero")

    @property
    def acyclic(self):
        return self.basis is None or self.basis.is_empty

    def descriptor(self):
        return "canonical-unit" if self.acyclic else self.basis.descriptor()

    def __complex__(self):
        return complex(self.value)


def restricted_condition(gram, B):
    """Condition of a form restricted to an orthonormally based subspace.

    Measured against the ambient form, ``|B| / sigma_min(gram)``, so a
    restriction that vanishes identically is reported as infinitely bad.
    """
    if gram.shape[0] == 0:
        return 1.0
    smin = np.linalg.svd(gram, compute_uv=False)[-1]
    norm = np.linalg.norm(B, 2)
    return float(np.inf) if smin <= 1e-300 * max(norm, 1.0) else float(max(norm, smin) / smin)


def _checked_form(C, b):
    if b is None:
        return GradedBilinearForm.standard(C.dims)
    b.compatible(C)
    return b


def cohomology(C, tol=None):
    """Cocycle representatives of a basis of ``H^q`` for every degree."""
    tol = default_tol() if tol is None else tol
    vectors = []
    for q in C.degrees:
        n = C.dim(q)
        _, Z = rank_kernel(C.d(q), tol)
        Bq = column_space(C.d(q - 1), tol)
        # complement of the boundaries inside the cocycles
        resid = Z - Bq @ (Bq.conj().T @ Z)
        h_dim = Z.shape[1] - Bq.shape[1]
        if h_dim <= 0:
            vectors.append(np.zeros((n, 0), dtype=np.complex128))
            continue
        u, _, _ = np.linalg.svd(resid, full_matrices=False)
        vectors.append(u[:, :h_dim])
    return CohomologyBasis(C.degree_min, tuple(vectors))


def betti_numbers(C, tol=None):
    tol = default_tol() if tol is None else tol
    ranks = {q: rank_kernel(C.d(q), tol)[0] for q in range(C.degree_min - 1, C.degree_max + 1)}
    return tuple(C.dim(q) - ranks[q] - ranks[q - 1] for q in C.degrees)


def is_acyclic(C, tol=None):
    return all(h == 0 for h in betti_numbers(C, tol))


def validate_cohomology_basis(C, h, tol=None):
    """Raise ``ValidationError`` unless ``h`` is a basis of ``H(C)`` by cocycles."""
    tol = default_tol() if tol is None else tol
    if h.degree_min != C.degree_min or len(h.vectors) != len(C.dims):
        raise ValidationError("cohomology_basis_degrees", "degree range differs from the complex")
    for q, expected in zip(C.degrees, betti_numbers(C, tol)):
        v = h.at(q)
        if v.shape != (C.dim(q), expected):
            raise ValidationError("cohomology_basis_size",
                                  f"degree {q}: expected {C.dim(q)}x{expected}, got {v.shape[0]}x{v.shape[1]}")
        if expected == 0:
            continue
        D = C.d(q)
        if D.size and np.linalg.norm(D @ v, 2) > tol * max(np.linalg.norm(D, 2), 1.0) * np.linalg.norm(v, 2):
            raise ValidationError("cohomology_basis_not_cocycle", f"degree {q}")
        Bq = column_space(C.d(q - 1), tol)
        stacked = np.hstack([Bq, v])
        if rank_kernel(stacked, tol)[0] != Bq.shape[1] + expected:
            raise ValidationError("cohomology_basis_dependent", f"degree {q}")


def transpose_differential(C, b, tol=None):
    """``d^#`` with ``b(d v, w) = b(v, d^# w)``; entry ``q`` maps ``C^{q+1} -> C^q``.

    In matrices ``D^#_q = B_q^{-1} D_q^t B_{q+1}``.
    """
    b = _checked_form(C, b)
    out = []
    for q in C.degrees:
        if q == C.degree_max:
            break
        Bq, Bq1 = b.gram(C, q), b.gram(C, q + 1)
        if Bq.shape[0] == 0:
            out.append(np.zeros((0, C.dim(q + 1)), dtype=np.complex128))
            continue
        try:
            out.append(scipy.linalg.solve(Bq, C.d(q).T @ Bq1, assume_a="sym"))
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise SingularFormError(f"Gram matrix in degree {q}: {exc}") from exc
    return out


def laplacian(C, b, tol=None):
    """``Delta_q = D^#_q D_q + D_{q-1} D^#_{q-1}`` for every degree, in order."""
    b = _checked_form(C, b)
    sharp = transpose_differential(C, b, tol)
    out = []
    for i, q in enumerate(C.degrees):
        n = C.dim(q)
        L = np.zeros((n, n), dtype=np.complex128)
        if i < len(sharp):
            L += sharp[i] @ C.d(q)
        if i > 0:
            L += C.d(q - 1) @ sharp[i - 1]
        out.append(L)
    return out


def _pivot_columns(D, rank):
    if rank == 0:
        return np.zeros(0, dtype=int)
    _, _, piv = scipy.linalg.qr(D, mode="economic", pivoting=True)
    return np.sort(piv[:rank])


def milnor_torsion(C, h, tol=None):
    """Torsion of ``C`` based by the standard basis, relative to the classes ``h``.

    Per degree the basis ``[d s_{q-1}, h_q, s_q]`` is compared with the
    standard basis, where ``s_q`` are the unit vectors on the pivot columns of
    a column-pivoted QR of ``D_q``. Returns ``prod det(M_q)^((-1)^(q+1))`` as
    a :class:`LogProduct`; its sign depends on the pivot order, its square
    does not.
    """
    tol = default_tol() if tol is None else tol
    pivots = {}
    for q in range(C.degree_min - 1, C.degree_max + 1):
        D = C.d(q)
        pivots[q] = _pivot_columns(D, rank_kernel(D, tol)[0]) if D.size else np.zeros(0, dtype=int)
    T = LogProduct()
    for q in C.degrees:
        n = C.dim(q)
        if n == 0:
            continue
        Mq = np.hstack([C.d(q - 1)[:, pivots[q - 1]], h.at(q), np.eye(n)[:, pivots[q]]])
        if Mq.shape[1] != n:
            raise ValidationError("cohomology_basis_size", f"degree {q}: adapted basis has "
                                  f"{Mq.shape[1]} vectors for dimension {n}")
        try:
            T.mul_det(Mq, (-1) ** (q + 1))
        except ZeroDivisionError as exc:
            raise ValidationError("cohomology_basis_dependent", f"degree {q}") from exc
    return T


def torsion_direct(C, b=None, h=None, tol=None):
    """Torsion via the determinant-line isomorphism.

    ``tau = prod_q det(B_q)^((-1)^q) / T^2`` where ``T`` is
    :func:`milnor_torsion`. For the two-term complex ``C^n --A--> C^n`` in
    degrees ``q, q+1`` with the standard form this gives
    ``det(A A^t)^((-1)^(q+1))``.
    """
    tol = default_tol() if tol is None else tol
    b = _checked_form(C, b)
    if h is None:
        h = cohomology(C, tol)
    else:
        validate_cohomology_basis(C, h, tol)
    tau = LogProduct()
    for q in C.degrees:
        B = b.gram(C, q)
        if B.shape[0]:
            try:
                tau.mul_det(B, (-1) ** q)
            except ZeroDivisionError as exc:
                raise SingularFormError(f"Gram matrix in degree {q} is singular") from exc
    T = milnor_torsion(C, h, tol)
    tau.phase /= T.phase ** 2
    tau.logabs -= 2 * T.logabs
    return TorsionValue(tau.value, None if h.is_empty else h)


def _split_by_radius(L, radius, tol):
    clusters = generalized_eigenspaces(L, tol)
    scale = spectral_scale([c.center for c in clusters])
    inside, outside = [], []
    for c in clusters:
        if abs(abs(c.center) - radius) <= tol * scale:
            raise ContourOnSpectrumError(
                f"eigenvalue cluster at {c.center:.6g} lies on the circle |z| = {radius}")
        (inside if abs(c.center) < radius else outside).append(c)
    n = L.shape[0]

    def stack(group):
        return np.hstack([c.basis for c in group]) if group else np.zeros((n, 0), dtype=np.complex128)

    return stack(inside), stack(outside)


def _truncate_singular(M, floor):
    # drop singular values below an absolute floor inherited from the ambient complex
    if M.size == 0:
        return M
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    s = np.where(s > floor, s, 0.0)
    return (u * s) @ vh


def spectral_split(C, b, radius, tol=None):
    """Per degree, bases ``(U_q, W_q)`` of the generalized eigenspaces of the
    Laplacian with ``|lambda| < radius`` and ``|lambda| > radius``."""
    tol = default_tol() if tol is None else tol
    if radius <= 0:
        raise ValueError("contour radius must be positive")
    return [_split_by_radius(L, radius, tol) for L in laplacian(C, b, tol)]


def torsion_spectral(C, b=None, radius=1.0, h=None, tol=None):
    """Torsion from the spectral splitting of the Laplacian at ``|z| = radius``.

    The inner part is a subcomplex whose torsion is computed directly after
    moving ``h`` into it along the spectral projection (a chain map inducing an
    isomorphism in cohomology). The outer part is acyclic with invertible
    Laplacian and contributes ``prod_q det(Delta_q|outer)^((-1)^q q)``.
    """
    tol = default_tol() if tol is None else tol
    b = _checked_form(C, b)
    if h is None:
        h = cohomology(C, tol)
    else:
        validate_cohomology_basis(C, h, tol)
    lap = laplacian(C, b, tol)
    split = [_split_by_radius(L, radius, tol) for L in lap]
    inv_full = []
    for U, W in split:
        Q = np.hstack([U, W])
        inv_full.append(np.linalg.inv(Q) if Q.shape[0] else Q)

    degrees = list(C.degrees)
    inner_dims, inner_diffs, inner_grams, inner_h = [], [], [], []
    outer = LogProduct()
    for i, q in enumerate(degrees):
        U, W = split[i]
        m = U.shape[1]
        inner_dims.append(m)
        gram = U.T @ b.gram(C, q) @ U
        cond = restricted_condition(gram, b.gram(C, q))
        if m and cond > FORM_CONDITION_LIMIT:
            raise SingularFormError(
                f"bilinear form is degenerate on the generalized eigenspaces inside |z| < {radius} "
                f"in degree {q} (condition {cond:.2e})")
        inner_grams.append(gram)
        inner_h.append((inv_full[i] @ h.at(q))[:m] if m else np.zeros((0, h.at(q).shape[1])))
        if i + 1 < len(degrees):
            image = (inv_full[i + 1] @ (C.d(q) @ U))[: split[i + 1][0].shape[1]]
            floor = tol * np.linalg.norm(C.d(q), 2) * np.linalg.norm(inv_full[i + 1], 2) if image.size else 0.0
            inner_diffs.append(_truncate_singular(image, floor))
        if W.shape[1] and q != 0:
            block = (inv_full[i] @ (lap[i] @ W))[m:]
            outer.mul_det(block, (-1) ** q * q)

    inner = GradedComplex(C.degree_min, tuple(inner_dims), tuple(inner_diffs), tol=max(tol, 1e-6))
    inner_b = GradedBilinearForm(tuple(inner_grams), tol=max(tol, 1e-6))
    inner_basis = CohomologyBasis(C.degree_min, tuple(inner_h))
    tau_in = torsion_direct(inner, inner_b, inner_basis, tol)
    return TorsionValue(tau_in.value * outer.value, None if h.is_empty else h)


def admissible_radii(C, b=None, tol=None, rel_gap=1e-3):
    """Radii strictly between consecutive distinct cluster moduli of the Laplacian.

    Returns the geometric (or arithmetic, next to zero) midpoints of every gap
    wider than ``rel_gap`` times the larger modulus, plus one radius beyond the
    spectrum. At least two radii are always returned.
    """
    tol = default_tol() if tol is None else tol
    mods = sorted({abs(c.center) for L in laplacian(C, b, tol) for c in generalized_eigenspaces(L, tol)})
    if not mods:
        return [1.0, 2.0]
    radii = []
    lo = 0.0
    for m in mods:
        if m - lo > rel_gap * max(m, 1e-300) and m > tol:
            radii.append(np.sqrt(lo * m) if lo > tol else 0.5 * m)
        lo = max(lo, m)
    radii.append(2.0 * mods[-1] + 1.0)
    if len(radii) == 1:
        # a single cluster modulus: any second radius beyond it is equally valid
        radii.append(4.0 * mods[-1] + 2.0)
    return radii


def direct_sum(C1, b1, C2, b2):
    """Block-diagonal sum; degree ranges are padded with zero spaces."""
    b1, b2 = _checked_form(C1, b1), _checked_form(C2, b2)
    lo = min(C1.degree_min, C2.degree_min)
    hi = max(C1.degree_max, C2.degree_max)
    dims, diffs, grams = [], [], []
    for q in range(lo, hi + 1):
        dims.append(C1.dim(q) + C2.dim(q))
        grams.append(scipy.linalg.block_diag(b1.gram(C1, q), b2.gram(C2, q)).astype(np.complex128))
        if q < hi:
            D = np.zeros((C1.dim(q + 1) + C2.dim(q + 1), dims[-1]), dtype=np.complex128)
            D[: C1.dim(q + 1), : C1.dim(q)] = C1.d(q)
            D[C1.dim(q + 1):, C1.dim(q):] = C2.d(q)
            diffs.append(D)
    return GradedComplex(lo, tuple(dims), tuple(diffs)), GradedBilinearForm(tuple(grams))


def conjugate(C, b=None):
    """Entrywise complex conjugate of differentials and Gram matrices."""
    b = _checked_form(C, b)
    return (GradedComplex(C.degree_min, C.dims, tuple(D.conj() for D in C.differentials)),
            GradedBilinearForm(tuple(B.conj() for B in b.grams)))


@dataclass(frozen=True)
class KernelFormReport:
    degree: int
    kernel_dim: int
    condition: float
    degenerate: bool


def kernel_form_report(C, b=None, tol=None):
    """Restriction of ``b`` to the honest kernel ``ker Delta_q`` in every degree.

    Unlike generalized eigenspaces, the plain kernel can carry a degenerate
    form when the Laplacian is not diagonalizable.
    """
    tol = default_tol() if tol is None else tol
    b = _checked_form(C, b)
    out = []
    for q, L in zip(C.degrees, laplacian(C, b, tol)):
        _, K = rank_kernel(L, tol)
        if K.shape[1] == 0:
            out.append(KernelFormReport(q, 0, 1.0, False))
            continue
        cond = restricted_condition(K.T @ b.gram(C, q) @ K, b.gram(C, q))
        out.append(KernelFormReport(q, K.shape[1], cond, cond > FORM_CONDITION_LIMIT))
    return out


def require_acyclic(C, tol=None):
    if not is_acyclic(C, tol):
        raise NotAcyclicError(f"complex has Betti numbers {betti_numbers(C, tol)}; "
                              "a cohomology basis is required for a torsion value")
