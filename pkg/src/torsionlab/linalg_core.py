"""Dense complex linear algebra shared by the torsion routines.

Everything here is a pure function of its inputs. Tolerances are relative;
the default comes from ``TORSION_TOL`` when set, else ``1e-8``.
"""
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ClusterAmbiguousError

DEFAULT_TOL = 1e-8
PSEUDOSPECTRAL_FACTOR = 1e3


def default_tol():
    raw = os.environ.get("TORSION_TOL")
    return float(raw) if raw else DEFAULT_TOL


def as_matrix(M, rows=None, cols=None):
    """Coerce to a finite 2-D complex array, optionally checking the shape."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if (rows is not None and A.shape[0] != rows) or (cols is not None and A.shape[1] != cols):
        raise ValueError(f"expected shape ({rows}, {cols}), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def rank_kernel(M, tol=None):
    """Numerical rank and an orthonormal kernel basis (as columns).

    Singular values at or below ``tol * sigma_max`` count as zero, so every
    kernel vector satisfies ``|M v| <= tol * |M|``.
    """
    tol = default_tol() if tol is None else tol
    M = np.asarray(M, dtype=np.complex128)
    rows, cols = M.shape
    if rows == 0 or cols == 0 or not np.any(M):
        return 0, np.eye(cols, dtype=np.complex128)
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol * s[0]))
    return rank, vh[rank:].conj().T


def column_space(M, tol=None):
    """Orthonormal basis of the range of ``M``."""
    tol = default_tol() if tol is None else tol
    M = np.asarray(M, dtype=np.complex128)
    if M.size == 0 or not np.any(M):
        return np.zeros((M.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    return u[:, : int(np.sum(s > tol * s[0]))]


def slogdet(M):
    """``(phase, log|det|)`` from a pivoted LU factorization."""
    M = np.asarray(M, dtype=np.complex128)
    if M.shape[0] == 0:
        return 1.0 + 0j, 0.0
    phase, logabs = np.linalg.slogdet(M)
    return complex(phase), float(logabs)


class LogProduct:
    """Running product of integer powers of complex numbers kept in log-space.

    The phase is carried as a unit complex number and raised to integer powers
    only, so no branch cut is ever crossed.
    """

    def __init__(self):
        self.phase = 1.0 + 0j
        self.logabs = 0.0

    def mul(self, value, power=1):
        value = complex(value)
        if value == 0:
            raise ZeroDivisionError("zero factor in log-space product")
        self.phase *= (value / abs(value)) ** power
        self.logabs += power * np.log(abs(value))
        self.phase /= abs(self.phase)
        return self

    def mul_det(self, M, power=1):
        phase, logabs = slogdet(M)
        if phase == 0:
            raise ZeroDivisionError("singular matrix in log-space product")
        self.phase *= phase ** power
        self.phase /= abs(self.phase)
        self.logabs += power * logabs
        return self

    @property
    def value(self):
        return complex(self.phase * np.exp(self.logabs))


@dataclass(frozen=True)
class EigenCluster:
    """A group of (numerically) coalesced eigenvalues and its invariant subspace.

    ``basis`` holds orthonormal columns spanning the generalized eigenspace.
    """

    center: complex
    multiplicity: int
    basis: np.ndarray
    members: tuple = ()


def spectral_scale(eigenvalues):
    return max(1.0, float(np.max(np.abs(eigenvalues)))) if len(eigenvalues) else 1.0


def _pseudospectrally_joined(M, lam1, lam2, eta, samples=7):
    # Both eigenvalues lie in one connected component of the eta-pseudospectrum
    # if sigma_min(M - z) stays below eta along the segment joining them.
    eye = np.eye(M.shape[0])
    for t in np.linspace(0.0, 1.0, samples + 2)[1:-1]:
        z = lam1 + t * (lam2 - lam1)
        if np.linalg.svd(M - z * eye, compute_uv=False)[-1] > eta:
            return False
    return True


def _cluster_labels(M, ev, tol, scale, norm):
    n = len(ev)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    reach = 4.0 * scale * max(tol ** (1.0 / n), tol)
    # backward-error level of the eigensolver, independent of tol
    eta = PSEUDOSPECTRAL_FACTOR * n * np.finfo(float).eps * max(norm, 1.0)
    for i in range(n):
        for j in range(i + 1, n):
            if find(i) == find(j):
                continue
            dist = abs(ev[i] - ev[j])
            if dist < tol * scale or (dist <= reach and _pseudospectrally_joined(M, ev[i], ev[j], eta)):
                parent[find(i)] = find(j)
    roots = {}
    return np.array([roots.setdefault(find(i), len(roots)) for i in range(n)])


def cluster_eigenvalues(M, tol=None, eigenvalues=None):
    """Partition the spectrum of ``M`` into clusters; returns one label per eigenvalue.

    Two eigenvalues join when closer than ``tol * scale`` or when they belong
    to the same component of the ``tol * |M|`` pseudospectrum, which is what
    keeps the numerically split eigenvalues of a Jordan block together.
    """
    tol = default_tol() if tol is None else tol
    M = np.asarray(M, dtype=np.complex128)
    ev = np.linalg.eigvals(M) if eigenvalues is None else np.asarray(eigenvalues)
    scale = spectral_scale(ev)
    norm = np.linalg.norm(M, 2) if M.size else 0.0
    labels = _cluster_labels(M, ev, tol, scale, norm)
    coarse = _cluster_labels(M, ev, 10 * tol, scale, norm)
    for lab in set(labels):
        group = set(coarse[labels == lab])
        if any(set(labels[coarse == g]) != {lab} for g in group):
            raise ClusterAmbiguousError(
                "eigenvalue clusters merge when the tolerance is raised tenfold; "
                "adjust tol")
    return ev, labels


def generalized_eigenspaces(M, tol=None):
    """Generalized eigenspaces of a square, possibly defective, complex matrix.

    Clusters are ordered by (|center|, arg center). Each basis is obtained by
    reordering a complex Schur form so that the cluster comes first; the
    leading Schur vectors then span the spectral subspace.
    """
    tol = default_tol() if tol is None else tol
    M = as_matrix(M)
    n = M.shape[0]
    if M.shape[1] != n:
        raise ValueError("generalized_eigenspaces needs a square matrix")
    if n == 0:
        return []
    ev, labels = cluster_eigenvalues(M, tol)
    clusters = []
    for lab in range(labels.max() + 1):
        members = ev[labels == lab]
        mask = labels == lab

        def select(x, ev=ev, mask=mask):
            return bool(mask[np.argmin(np.abs(ev - x))])

        _, Z, sdim = scipy.linalg.schur(M, output="complex", sort=select)
        if sdim != len(members):
            raise ClusterAmbiguousError(
                f"Schur reordering selected {sdim} eigenvalues for a cluster of {len(members)}")
        clusters.append(EigenCluster(
            center=complex(np.mean(members)),
            multiplicity=len(members),
            basis=Z[:, :sdim],
            members=tuple(complex(x) for x in members),
        ))
    clusters.sort(key=lambda c: (round(abs(c.center), 12), np.angle(c.center)))
    return clusters


def generalized_kernel(M, lam, tol=None):
    """Basis of ker (M - lam)^N by growing kernels of successive powers.

    Stops once the kernel dimension stabilizes. Each power ``B^j`` is
    thresholded relative to ``|B|^j``. Intended for exactly defective inputs
    and as an independent check on :func:`generalized_eigenspaces`.
    """
    tol = default_tol() if tol is None else tol
    M = as_matrix(M)
    n = M.shape[0]
    B = M - lam * np.eye(n)
    norm = max(np.linalg.norm(B, 2), 1e-300)
    P = np.eye(n, dtype=np.complex128)
    kernel = np.zeros((n, 0), dtype=np.complex128)
    for j in range(1, n + 1):
        P = P @ (B / norm)
        _, s, vh = np.linalg.svd(P)
        rank = int(np.sum(s > tol))
        new = vh[rank:].conj().T
        if new.shape[1] == kernel.shape[1]:
            break
        kernel = new
    return kernel


def is_invertible(M, tol=None):
    tol = default_tol() if tol is None else tol
    M = np.asarray(M, dtype=np.complex128)
    if M.shape[0] == 0:
        return True
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[-1] > tol * s[0])


def condition_number(M):
    M = np.asarray(M, dtype=np.complex128)
    if M.shape[0] == 0:
        return 1.0
    s = np.linalg.svd(M, compute_uv=False)
    return float(np.inf) if s[-1] == 0 else float(s[0] / s[-1])
