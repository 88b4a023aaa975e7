"""Matrix-valued trigonometric polynomials on the circle.

``TrigPoly`` stores Fourier coefficients ``c_m`` (``|m| <= degree``) of
``f(theta) = sum_m c_m exp(i m theta)`` as an array of shape
``(2*degree + 1, k, k)``. Sums, products, derivatives and transposes are
exact; only :meth:`TrigPoly.from_samples` (used for inverses) truncates.
"""
import numpy as np


class TrigPoly:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.ndim != 3 or c.shape[0] % 2 != 1 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coefficient array must have shape (2D+1, k, k), got {c.shape}")
        self.coeffs = c

    @classmethod
    def from_modes(cls, modes, k=None):
        """Build from a mapping ``mode -> k x k matrix`` (scalars allowed when k == 1)."""
        mats = {int(m): np.atleast_2d(np.asarray(v, dtype=np.complex128)) for m, v in modes.items()}
        if k is None:
            if not mats:
                raise ValueError("rank is required for an empty mode mapping")
            k = next(iter(mats.values())).shape[0]
        deg = max((abs(m) for m in mats), default=0)
        c = np.zeros((2 * deg + 1, k, k), dtype=np.complex128)
        for m, v in mats.items():
            if v.shape != (k, k):
                raise ValueError(f"mode {m} has shape {v.shape}, expected ({k}, {k})")
            c[m + deg] = v
        return cls(c)

    @classmethod
    def constant(cls, value, k=None):
        v = np.atleast_2d(np.asarray(value, dtype=np.complex128))
        if k is not None and v.shape == (1, 1) and k > 1:
            v = v[0, 0] * np.eye(k)
        return cls(v[None])

    @classmethod
    def from_samples(cls, samples, rel_cutoff=1e-13):
        """Interpolating trig polynomial through uniform samples ``(N, k, k)``.

        Trailing modes below ``rel_cutoff`` times the largest coefficient are
        dropped. The top mode of an even grid is discarded.
        """
        samples = np.asarray(samples, dtype=np.complex128)
        N = samples.shape[0]
        F = np.fft.fft(samples, axis=0) / N
        deg = (N - 1) // 2
        c = np.concatenate([F[N - deg:], F[: deg + 1]], axis=0)
        mags = np.abs(c).max(axis=(1, 2))
        peak = mags.max()
        keep = deg
        while keep > 0 and max(mags[deg + keep], mags[deg - keep]) <= rel_cutoff * peak:
            keep -= 1
        return cls(c[deg - keep: deg + keep + 1])

    @property
    def degree(self):
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def rank(self):
        return self.coeffs.shape[1]

    def mode(self, m):
        d = self.degree
        if abs(m) > d:
            return np.zeros((self.rank, self.rank), dtype=np.complex128)
        return self.coeffs[m + d]

    def padded(self, degree):
        d = self.degree
        if degree < d:
            raise ValueError("cannot pad to a smaller degree")
        out = np.zeros((2 * degree + 1, self.rank, self.rank), dtype=np.complex128)
        out[degree - d: degree + d + 1] = self.coeffs
        return TrigPoly(out)

    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(other, self.rank)
        d = max(self.degree, other.degree)
        return TrigPoly(self.padded(d).coeffs + other.padded(d).coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        """Pointwise product: matrix product at each angle (scalars scale)."""
        if not isinstance(other, TrigPoly):
            return TrigPoly(self.coeffs * complex(other))
        a, b = self.coeffs, other.coeffs
        k = self.rank
        out = np.zeros((a.shape[0] + b.shape[0] - 1, k, k), dtype=np.complex128)
        for i in range(k):
            for j in range(k):
                for m in range(k):
                    out[:, i, j] += np.convolve(a[:, i, m], b[:, m, j])
        return TrigPoly(out)

    def __rmul__(self, other):
        return TrigPoly(self.coeffs * complex(other))

    def __matmul__(self, other):
        return self * other

    @property
    def T(self):
        return TrigPoly(self.coeffs.transpose(0, 2, 1))

    def derivative(self):
        d = self.degree
        return TrigPoly(1j * np.arange(-d, d + 1)[:, None, None] * self.coeffs)

    def trace(self):
        return TrigPoly(np.trace(self.coeffs, axis1=1, axis2=2)[:, None, None])

    def mean(self):
        """Average over the circle, ``(1/2pi) * integral``."""
        return self.coeffs[self.degree].copy()

    def integral(self):
        return 2 * np.pi * self.mean()

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        d = self.degree
        phases = np.exp(1j * np.multiply.outer(theta, np.arange(-d, d + 1)))
        return np.tensordot(phases, self.coeffs, axes=(-1, 0))

    def sample(self, N):
        return self(grid(N))

    def is_symmetric(self, tol):
        scale = max(np.abs(self.coeffs).max(), 1e-300)
        return bool(np.abs(self.coeffs - self.coeffs.transpose(0, 2, 1)).max() <= tol * scale)

    def is_real(self, tol=0.0):
        """Real-valued on the circle: ``c_{-m} = conj(c_m)``."""
        return bool(np.abs(self.coeffs - self.coeffs[::-1].conj()).max() <= tol * max(np.abs(self.coeffs).max(), 1.0))

    def to_modes(self):
        d = self.degree
        return {m: self.coeffs[m + d] for m in range(-d, d + 1) if np.any(self.coeffs[m + d])}

    def __repr__(self):
        return f"TrigPoly(rank={self.rank}, degree={self.degree})"


def grid(N):
    return 2 * np.pi * np.arange(N) / N


def trapezoid(samples):
    """Periodic trapezoidal rule on the uniform grid over ``[0, 2pi]``."""
    samples = np.asarray(samples)
    return 2 * np.pi * samples.mean(axis=0)
