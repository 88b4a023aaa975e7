"""Random instance generators shared by the test modules."""
import numpy as np

from torsionlab.circle_analytic import CircleBundle, monodromy
from torsionlab.complex_torsion import GradedBilinearForm, GradedComplex


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_complex(rng, n_degrees=None, max_dim=6, degree_min=None):
    """Random complex with prescribed ranks, conjugated by random bases, and a
    random symmetric (non-Hermitian) form."""
    n_degrees = int(rng.integers(3, 5)) if n_degrees is None else n_degrees
    while True:
        dims = rng.integers(1, max_dim + 1, size=n_degrees)
        ranks = [0]
        for q in range(n_degrees - 1):
            avail = min(dims[q] - ranks[-1], dims[q + 1])
            ranks.append(int(rng.integers(0, avail + 1)))
        ranks.append(0)
        if all(ranks[q] + ranks[q + 1] <= dims[q] for q in range(n_degrees)):
            break
    bases = [crandn(rng, n, n) for n in dims]
    diffs = []
    for q in range(n_degrees - 1):
        r = ranks[q + 1]
        N = np.zeros((dims[q + 1], dims[q]), dtype=complex)
        N[:r, dims[q] - r:] = crandn(rng, r, r)
        diffs.append(bases[q + 1] @ N @ np.linalg.inv(bases[q]))
    grams = []
    for n in dims:
        X = crandn(rng, n, n)
        grams.append(X + X.T)
    d0 = int(rng.integers(-1, 2)) if degree_min is None else degree_min
    return GradedComplex(d0, tuple(int(n) for n in dims), tuple(diffs)), GradedBilinearForm(tuple(grams))


def random_acyclic_complex(rng, n_degrees=3, max_dim=4):
    """Acyclic complex built as a direct sum of shifted invertible two-term pieces."""
    pieces = [int(rng.integers(0, max_dim + 1)) for _ in range(n_degrees - 1)]
    dims = [0] * n_degrees
    for q, n in enumerate(pieces):
        dims[q] += n
        dims[q + 1] += n
    if min(dims) == 0:
        return random_acyclic_complex(rng, n_degrees, max_dim)
    bases = [crandn(rng, n, n) for n in dims]
    diffs = []
    offset_lo = 0
    for q, n in enumerate(pieces):
        D = np.zeros((dims[q + 1], dims[q]), dtype=complex)
        prev = pieces[q - 1] if q > 0 else 0
        D[:n, prev:prev + n] = crandn(rng, n, n)
        diffs.append(bases[q + 1] @ D @ np.linalg.inv(bases[q]))
    grams = []
    for n in dims:
        X = crandn(rng, n, n)
        grams.append(X + X.T)
    return GradedComplex(0, tuple(dims), tuple(diffs)), GradedBilinearForm(tuple(grams))


def symmetric_modes(rng, k, degree, scale):
    modes = {}
    for m in range(0, degree + 1):
        X = scale * crandn(rng, k, k)
        X = X + X.T
        modes[m] = X
        if m:
            Y = scale * crandn(rng, k, k)
            modes[-m] = Y + Y.T
    return modes


def random_bundle(rng, k=None, a_degree=3, b_degree=2, winding=None, a_scale=0.3,
                  b_scale=0.05, sample_count=256, min_gap=1e-2):
    """Random acyclic bundle; ``b = exp(i w theta) (I + small symmetric)``."""
    k = int(rng.integers(1, 3)) if k is None else k
    w = int(rng.integers(0, 2)) if winding is None else winding
    while True:
        a = {m: a_scale * crandn(rng, k, k) for m in range(-a_degree, a_degree + 1)}
        pert = symmetric_modes(rng, k, max(b_degree - w, 0), b_scale) if b_degree > w else {}
        inner = {m: v for m, v in pert.items()}
        inner[0] = inner.get(0, 0) + np.eye(k)
        b = {m + w: v for m, v in inner.items()}
        bundle = CircleBundle.from_modes(a, b, rank=k, sample_count=sample_count)
        A = monodromy(bundle).A
        if abs(np.linalg.det(A - np.eye(k))) > min_gap:
            return bundle


def ex34(z):
    return GradedComplex(0, (1, 2, 1), (np.array([[1], [1j]]), z * np.array([[1, 1j]])))
