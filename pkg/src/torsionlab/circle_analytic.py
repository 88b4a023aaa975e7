"""Flat bundles over the circle and their analytic torsion.

A bundle is the trivial ``C^k`` bundle with connection ``d/dtheta + a`` and a
fiberwise symmetric bilinear form ``b``; both are trig polynomials. The
zeta-regularized determinant of the degree-one Laplacian is evaluated from
the Burghelea-Friedlander-Kappeler closed form; Fourier-Galerkin spectra are
only used to validate that closed form through determinant ratios.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .complex_torsion import TorsionValue
from .errors import IntegrationDivergedError, NotAcyclicError, SingularFormError, ValidationError
from .linalg_core import default_tol, slogdet
from .trigpoly import TrigPoly, grid, trapezoid

DEFAULT_SAMPLES = 256
MONODROMY_RTOL = 1e-12


@dataclass(frozen=True)
class CircleBundle:
    a: TrigPoly
    b: TrigPoly
    sample_count: int = DEFAULT_SAMPLES
    tol: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        tol = default_tol() if self.tol is None else self.tol
        if self.a.rank != self.b.rank:
            raise ValidationError("rank_mismatch", f"a has rank {self.a.rank}, b has rank {self.b.rank}")
        if self.sample_count <= 2 * (self.a.degree + self.b.degree) + 2:
            raise ValidationError("sample_count_too_small",
                                  f"{self.sample_count} samples cannot resolve degree "
                                  f"{self.a.degree + self.b.degree} products")
        if not self.b.is_symmetric(tol):
            raise ValidationError("b_not_symmetric")
        s = np.linalg.svd(self.b.sample(self.sample_count), compute_uv=False)
        if np.any(s[:, -1] <= tol * s[:, 0]):
            raise SingularFormError("b is not invertible at some grid sample")

    @classmethod
    def from_modes(cls, a_modes, b_modes=None, rank=None, sample_count=DEFAULT_SAMPLES):
        a = TrigPoly.from_modes(a_modes, rank)
        b = TrigPoly.constant(np.eye(a.rank)) if b_modes is None else TrigPoly.from_modes(b_modes, a.rank)
        return cls(a, b, sample_count)

    @classmethod
    def constant(cls, c, b=None, sample_count=DEFAULT_SAMPLES):
        """Constant connection matrix ``c`` (scalar for line bundles)."""
        c = np.atleast_2d(np.asarray(c, dtype=np.complex128))
        bb = TrigPoly.constant(np.eye(c.shape[0])) if b is None else b
        return cls(TrigPoly.constant(c), bb, sample_count)

    @property
    def rank(self):
        return self.a.rank

    def grid(self):
        return grid(self.sample_count)

    def is_real(self):
        return self.a.is_real() and self.b.is_real()

    def b_inverse(self):
        """Fourier series of ``b^{-1}`` from grid samples.

        ``b^{-1}`` is generally not a trig polynomial; the series is accepted
        only if its top quarter of modes is negligible.
        """
        N = self.sample_count
        inv = np.linalg.inv(self.b.sample(N))
        full = TrigPoly.from_samples(inv, rel_cutoff=-1.0)
        mags = np.abs(full.coeffs).max(axis=(1, 2))
        deg = full.degree
        tail = max(mags[: deg // 4 + 1].max(), mags[-(deg // 4 + 1):].max())
        if tail > 1e-13 * mags.max():
            raise SingularFormError(
                f"b^-1 is not resolved by {N} samples (tail {tail / mags.max():.1e}); "
                "increase sample_count")
        return TrigPoly.from_samples(inv, rel_cutoff=1e-15)


@dataclass(frozen=True)
class Holonomy:
    """Holonomy ``A`` along the positive generator of ``pi_1(S^1)``."""

    A: np.ndarray
    steps: int = 0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("holonomy must be a square matrix")
        if np.linalg.svd(A, compute_uv=False)[-1] == 0:
            raise ValueError("holonomy must be invertible")
        object.__setattr__(self, "A", A)

    @property
    def rank(self):
        return self.A.shape[0]

    @property
    def det(self):
        return complex(np.linalg.det(self.A))


def trace_integral_a(bundle):
    """``int_0^{2pi} tr a(theta) dtheta`` (exact from the zero mode)."""
    return complex(np.trace(bundle.a.integral()))


def monodromy(bundle, rtol=MONODROMY_RTOL, richardson_steps=1024, check_tol=1e-7):
    """Parallel transport around the circle.

    Solves ``Y' = Y a`` on ``[0, 2pi]`` with ``Y(0) = I`` by adaptive
    Dormand-Prince 5(4), which is the convention with
    ``det A = exp(int tr a)``. A Richardson-extrapolated fixed-step RK4 run is
    used as a self-check.
    """
    coeffs = np.ascontiguousarray(bundle.a.coeffs)
    Y, steps, status = kernels.transport_dopri5(coeffs, rtol, rtol * 1e-2, 10_000_000)
    if status != 0 or not np.all(np.isfinite(Y)):
        raise IntegrationDivergedError(f"adaptive step control failed (status {status}, {steps} steps)")
    coarse = kernels.transport_rk4(coeffs, richardson_steps)
    fine = kernels.transport_rk4(coeffs, 2 * richardson_steps)
    extrapolated = fine + (fine - coarse) / 15.0
    scale = np.linalg.norm(Y)
    if np.linalg.norm(extrapolated - Y) > check_tol * scale:
        raise IntegrationDivergedError(
            f"Richardson self-check disagrees by {np.linalg.norm(extrapolated - Y) / scale:.2e}")
    expected = np.exp(trace_integral_a(bundle))
    det = np.linalg.det(Y)
    if abs(det - expected) > 1e-8 * abs(det):
        raise IntegrationDivergedError(
            f"det A = {det:.12g} but exp(int tr a) = {expected:.12g}")
    return Holonomy(Y, steps)


@dataclass(frozen=True)
class LaplacianCoefficients:
    """``Delta_q = -d^2 + first_order * d + zeroth_order[q]`` as trig series.

    ``sharp_zeroth`` is the multiplicative part of ``d^# = -d/dtheta + sharp_zeroth``.
    """

    first_order: TrigPoly
    zeroth_order: tuple
    sharp_zeroth: TrigPoly
    log_derivative: TrigPoly
    b_inverse: TrigPoly

    def operator(self, degree):
        if degree not in (0, 1):
            raise ValueError("degree must be 0 or 1 on the circle")
        return self.first_order, self.zeroth_order[degree]


def laplacian_coefficients(bundle):
    """Coefficients of ``Delta_0 = d^# d`` and ``Delta_1 = d d^#``.

    With ``L = b^{-1} b'`` and ``c = b^{-1} a^t b - L``:
    first order ``c - a``; zeroth order ``c a - a'`` in degree 0 and
    ``c' + a c`` in degree 1.
    """
    a, b = bundle.a, bundle.b
    binv = bundle.b_inverse()
    L = binv * b.derivative()
    c = binv * a.T * b - L
    first = c - a
    zeroth0 = c * a - a.derivative()
    zeroth1 = c.derivative() + a * c
    return LaplacianCoefficients(first, (zeroth0, zeroth1), c, L, binv)


def check_laplacian_coefficients(bundle, rng=None, n_sections=3, section_degree=4):
    """Largest relative gap between ``d^# d``, ``d d^#`` applied on the grid to
    random trig-polynomial sections and the expanded coefficient formulas."""
    rng = np.random.default_rng(0) if rng is None else rng
    k, N = bundle.rank, bundle.sample_count
    theta = grid(N)
    freqs = np.fft.fftfreq(N, d=1.0 / N)
    freqs[N // 2] = 0.0 if N % 2 == 0 else freqs[N // 2]

    def deriv(vals):
        return np.fft.ifft(1j * freqs[:, None] * np.fft.fft(vals, axis=0), axis=0)

    a_s = bundle.a(theta)
    b_s = bundle.b(theta)
    bp_s = bundle.b.derivative()(theta)
    binv = np.linalg.inv(b_s)
    coeffs = laplacian_coefficients(bundle)

    def d(v):
        return deriv(v) + np.einsum("nij,nj->ni", a_s, v)

    def dsharp(v):
        mult = binv @ (np.transpose(a_s, (0, 2, 1)) @ b_s) - binv @ bp_s
        return -deriv(v) + np.einsum("nij,nj->ni", mult, v)

    worst = 0.0
    for _ in range(n_sections):
        modes = {m: rng.normal(size=(k, 1)) + 1j * rng.normal(size=(k, 1)) for m in range(-section_degree, section_degree + 1)}
        phases = np.exp(1j * np.multiply.outer(theta, np.arange(-section_degree, section_degree + 1)))
        vec = np.stack([modes[m][:, 0] for m in range(-section_degree, section_degree + 1)])
        s = phases @ vec
        s1 = phases @ (1j * np.arange(-section_degree, section_degree + 1)[:, None] * vec)
        s2 = phases @ (-(np.arange(-section_degree, section_degree + 1) ** 2)[:, None] * vec)
        for degree, composed in ((0, dsharp(d(s))), (1, d(dsharp(s)))):
            p, r = coeffs.operator(degree)
            expanded = -s2 + np.einsum("nij,nj->ni", p(theta), s1) + np.einsum("nij,nj->ni", r(theta), s)
            gap = np.abs(composed - expanded).max() / max(np.abs(expanded).max(), 1.0)
            worst = max(worst, gap)
    return float(worst)


def galerkin_matrix(bundle, degree, M, coefficients=None):
    coefficients = laplacian_coefficients(bundle) if coefficients is None else coefficients
    p, r = coefficients.operator(degree)
    return kernels.galerkin_assemble(p.coeffs, r.coeffs, M)


def _sorted_spectrum(ev):
    return ev[np.lexsort((np.round(ev.imag, 10), np.round(ev.real, 10), np.round(np.abs(ev), 10)))]


def _match_movement(low, reference):
    cost = np.abs(low[:, None] - reference[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols] / np.maximum(1.0, np.abs(low[rows]))))


@dataclass(frozen=True)
class SpectralReport:
    degree: int
    truncation: int
    eigenvalues: np.ndarray
    log_partial_products: np.ndarray
    convergence_estimate: float


def galerkin_eigenvalues(bundle, degree, M, coefficients=None):
    return _sorted_spectrum(np.linalg.eigvals(galerkin_matrix(bundle, degree, M, coefficients)))


def galerkin_spectrum(bundle, degree, M):
    """Eigenvalues of the Laplacian compressed to Fourier modes ``|m| <= M``.

    ``convergence_estimate`` is the largest relative movement of the lowest
    ``k (2 floor(M/2) + 1)`` eigenvalues against truncation ``M - 2``.
    """
    if M < bundle.a.degree + bundle.b.degree or M < 2:
        raise ValueError(f"truncation {M} is below the combined coefficient degree "
                         f"{bundle.a.degree + bundle.b.degree}")
    coeffs = laplacian_coefficients(bundle)
    ev = galerkin_eigenvalues(bundle, degree, M, coeffs)
    prev = galerkin_eigenvalues(bundle, degree, M - 2, coeffs)
    count = bundle.rank * (2 * (M // 2) + 1)
    movement = _match_movement(ev[:count], prev)
    with np.errstate(divide="ignore"):
        logs = np.cumsum(np.log(ev.astype(np.complex128)))
    return SpectralReport(degree, M, ev, logs, movement)


def galerkin_self_convergence(bundle, degree, M_low, M_high, count=None):
    """Relative movement of the lowest ``count`` eigenvalues between truncations."""
    coeffs = laplacian_coefficients(bundle)
    low = galerkin_eigenvalues(bundle, degree, M_low, coeffs)
    high = galerkin_eigenvalues(bundle, degree, M_high, coeffs)
    count = bundle.rank * (2 * (M_low // 2) + 1) if count is None else count
    return _match_movement(low[:count], high)


def galerkin_log_det(bundle, degree, M):
    phase, logabs = slogdet(galerkin_matrix(bundle, degree, M))
    return complex(logabs + 1j * np.angle(phase))


def galerkin_determinant_ratio(bundle, other, M, degree=1):
    """Truncated determinant ratio of two Laplacians and its extrapolation.

    The ratio of truncated products converges like ``1/M``; the second value
    removes that term by Richardson extrapolation between ``M/2`` and ``M``.
    """
    def log_ratio(m):
        diff = galerkin_log_det(bundle, degree, m) - galerkin_log_det(other, degree, m)
        return complex(diff.real, np.angle(np.exp(1j * diff.imag)))

    full, half = log_ratio(M), log_ratio(M // 2)
    return complex(np.exp(full)), complex(np.exp(2 * full - half))


def log_derivative_integral(bundle):
    """``int tr(b^{-1} b') dtheta`` by the periodic trapezoidal rule."""
    theta = bundle.grid()
    integrand = np.trace(np.linalg.solve(bundle.b(theta), bundle.b.derivative()(theta)), axis1=1, axis2=2)
    return complex(trapezoid(integrand))


def winding_number(bundle):
    """Winding number of ``det b`` around 0, from the log-derivative integral."""
    return int(np.rint((log_derivative_integral(bundle) / (2j * np.pi)).real))


def kamber_tondeur_integral(bundle):
    """Period of ``-1/2 tr(b^{-1} nabla b)`` over the circle."""
    return -0.5 * (log_derivative_integral(bundle) - 2 * trace_integral_a(bundle))


def b_sign(bundle):
    """``s_[b] = exp(-1/2 int tr(b^{-1} b'))``, which is +1 or -1."""
    return complex(np.exp(-0.5 * log_derivative_integral(bundle)))


def _acyclic_det(holonomy, tol):
    A = holonomy.A
    det_a1 = complex(np.linalg.det(A - np.eye(A.shape[0])))
    if abs(det_a1) <= tol * max(1.0, np.linalg.norm(A, 2)) ** A.shape[0]:
        raise NotAcyclicError("1 is an eigenvalue of the holonomy: det(A - 1) = 0")
    return det_a1


def bfk_determinant(bundle, holonomy=None, tol=None):
    """Zeta-regularized determinant of ``Delta_1``.

    ``exp(1/2 int (tr(b^{-1} b') - 2 tr a)) det(A - 1)^2``.
    """
    tol = default_tol() if tol is None else tol
    holonomy = monodromy(bundle) if holonomy is None else holonomy
    det_a1 = _acyclic_det(holonomy, tol)
    exponent = 0.5 * (log_derivative_integral(bundle) - 2 * trace_integral_a(bundle))
    return complex(np.exp(exponent) * det_a1 ** 2)


@dataclass(frozen=True)
class EulerStructureS1:
    """Integral Euler structure ``[-d/dtheta, 0] + offset`` (``H_1(S^1; Z) = Z``)."""

    offset: int = 0

    def __post_init__(self):
        if int(self.offset) != self.offset:
            raise ValueError("Euler structure offsets are integers")
        object.__setattr__(self, "offset", int(self.offset))

    def __add__(self, sigma):
        return EulerStructureS1(self.offset + int(sigma))


@dataclass(frozen=True)
class CoEulerStructureS1:
    """CoEuler structure ``[g, 1/2] + offset``.

    The action is ``[g, alpha] + beta = [g, alpha - beta]``, so the structure
    is ``[g, 1/2 - offset]`` and the canonical ``[g, 0]`` has offset ``1/2``.
    """

    offset: complex = 0j
    canonical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "offset", complex(self.offset))
        if self.canonical and self.offset != 0.5:
            raise ValueError("the canonical coEuler structure has offset 1/2")

    @classmethod
    def base(cls):
        return cls(0j)

    @classmethod
    def canonical_structure(cls):
        return cls(0.5, canonical=True)

    @property
    def alpha(self):
        return 0.5 - self.offset

    def __add__(self, beta):
        new = self.offset + complex(beta)
        return CoEulerStructureS1(new, canonical=(new == 0.5))


def analytic_torsion_circle(bundle, coeuler=None, holonomy=None, tol=None):
    """Analytic torsion of an acyclic bundle at a coEuler structure ``[g, alpha]``.

    ``det(Delta_1)^{-1} exp(-2 alpha int omega)``; the zero generalized
    eigenspace is trivial and ``Delta_0`` carries weight zero. At the base
    structure this is ``det(A - 1)^{-2}``; at the canonical one it is
    ``s_[b] det A det(A - 1)^{-2}``.
    """
    coeuler = CoEulerStructureS1.base() if coeuler is None else coeuler
    holonomy = monodromy(bundle) if holonomy is None else holonomy
    det_laplace = bfk_determinant(bundle, holonomy, tol)
    correction = np.exp(-2 * coeuler.alpha * kamber_tondeur_integral(bundle))
    return TorsionValue(complex(correction / det_laplace))


def holonomy_sign(bundle, holonomy=None):
    """``exp(int omega) / det A``, which is +1 or -1."""
    holonomy = monodromy(bundle) if holonomy is None else holonomy
    return complex(np.exp(kamber_tondeur_integral(bundle)) / holonomy.det)
