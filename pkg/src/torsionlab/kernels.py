"""Hot numeric kernels.

Each kernel is compiled with numba unless ``TORSIONLAB_DISABLE_NUMBA`` is set,
in which case the numpy implementations below are used instead. Trig
polynomial coefficients are passed as arrays of shape ``(2*D + 1, k, k)``
with mode ``m`` stored at index ``m + D``.
"""
import numpy as np

from ._accel import USE_NUMBA, jit

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@jit
def _eval_trig_loops(coeffs, theta):
    n_modes, k, _ = coeffs.shape
    deg = (n_modes - 1) // 2
    out = np.zeros((k, k), dtype=np.complex128)
    step = np.exp(1j * theta)
    z = np.exp(-1j * deg * theta)
    for idx in range(n_modes):
        for i in range(k):
            for j in range(k):
                out[i, j] += coeffs[idx, i, j] * z
        z *= step
    return out


@jit
def _right_mul(Y, a):
    k = Y.shape[0]
    out = np.zeros((k, k), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            s = 0j
            for m in range(k):
                s += Y[i, m] * a[m, j]
            out[i, j] = s
    return out


def _eval_trig_numpy(coeffs, theta):
    deg = (coeffs.shape[0] - 1) // 2
    return np.tensordot(np.exp(1j * theta * np.arange(-deg, deg + 1)), coeffs, axes=(0, 0))


# the transport loops below resolve these names at call time
eval_trig = _eval_trig_loops if USE_NUMBA else _eval_trig_numpy
eval_trig.__doc__ = "Value of a matrix trig polynomial at one angle."
if not USE_NUMBA:
    _right_mul = np.dot


@jit
def _dopri5_loops(coeffs, rtol, atol, max_steps):
    k = coeffs.shape[1]
    t_end = 2.0 * np.pi
    Y = np.eye(k).astype(np.complex128)
    K = np.zeros((7, k, k), dtype=np.complex128)
    t = 0.0
    h = 1e-2
    accepted = 0
    K[0] = _right_mul(Y, eval_trig(coeffs, t))
    for _ in range(max_steps):
        if t >= t_end:
            return Y, accepted, 0
        if t + h > t_end:
            h = t_end - t
        for s in range(1, 7):
            Ys = Y.copy()
            for r in range(s):
                if _A[s, r] != 0.0:
                    Ys += h * _A[s, r] * K[r]
            K[s] = _right_mul(Ys, eval_trig(coeffs, t + _C[s] * h))
        Ynew = Y.copy()
        err = np.zeros((k, k), dtype=np.complex128)
        for s in range(7):
            Ynew += h * _B5[s] * K[s]
            err += h * _E[s] * K[s]
        acc = 0.0
        for i in range(k):
            for j in range(k):
                scale = atol + rtol * max(abs(Y[i, j]), abs(Ynew[i, j]))
                acc += (abs(err[i, j]) / scale) ** 2
        err_norm = np.sqrt(acc / (k * k))
        if err_norm <= 1.0:
            t += h
            Y = Ynew
            K[0] = K[6]
            accepted += 1
            factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        else:
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h *= factor
        if h < 1e-14:
            return Y, accepted, 2
    if t >= t_end:
        return Y, accepted, 0
    return Y, accepted, 1


@jit
def _rk4_loops(coeffs, n_steps):
    k = coeffs.shape[1]
    h = 2.0 * np.pi / n_steps
    Y = np.eye(k).astype(np.complex128)
    for i in range(n_steps):
        t = i * h
        a0 = eval_trig(coeffs, t)
        a1 = eval_trig(coeffs, t + 0.5 * h)
        a2 = eval_trig(coeffs, t + h)
        k1 = _right_mul(Y, a0)
        k2 = _right_mul(Y + 0.5 * h * k1, a1)
        k3 = _right_mul(Y + 0.5 * h * k2, a1)
        k4 = _right_mul(Y + h * k3, a2)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def _trig_at(coeffs, thetas):
    n_modes, k, _ = coeffs.shape
    deg = (n_modes - 1) // 2
    phases = np.exp(1j * np.multiply.outer(thetas, np.arange(-deg, deg + 1)))
    return (phases @ coeffs.reshape(n_modes, k * k)).reshape(len(thetas), k, k)


def _dopri5_numpy(coeffs, rtol, atol, max_steps):
    # stage values of a are evaluated in one batch per step; stages are kept flat
    n_modes, k, _ = coeffs.shape
    deg = (n_modes - 1) // 2
    flat = coeffs.reshape(n_modes, k * k)
    modes = 1j * np.arange(-deg, deg + 1)
    nodes = _C[1:]
    t_end = 2.0 * np.pi
    Y = np.eye(k, dtype=np.complex128).ravel()
    K = np.zeros((7, k * k), dtype=np.complex128)
    t, h, accepted = 0.0, 1e-2, 0
    K[0] = (Y.reshape(k, k) @ _trig_at(coeffs, np.array([0.0]))[0]).ravel()
    for _ in range(max_steps):
        if t >= t_end:
            return Y.reshape(k, k), accepted, 0
        h = min(h, t_end - t)
        a = (np.exp(np.multiply.outer(t + nodes * h, modes)) @ flat).reshape(6, k, k)
        for s in range(1, 7):
            Ys = Y + h * (_A[s, :s] @ K[:s])
            K[s] = (Ys.reshape(k, k) @ a[s - 1]).ravel()
        Ynew = Y + h * (_B5 @ K)
        err = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(Y), np.abs(Ynew))
        err_norm = float(np.sqrt(np.sum((np.abs(err) / scale) ** 2) / (k * k)))
        if err_norm <= 1.0:
            t += h
            Y = Ynew
            K[0] = K[6]
            accepted += 1
            factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        else:
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h *= factor
        if h < 1e-14:
            return Y.reshape(k, k), accepted, 2
    if t >= t_end:
        return Y.reshape(k, k), accepted, 0
    return Y.reshape(k, k), accepted, 1


def _rk4_numpy(coeffs, n_steps):
    # for a linear equation each RK4 step is Y -> Y P_n; build every P_n at once
    # and multiply them out in a pairwise tree, keeping the left-to-right order
    k = coeffs.shape[1]
    h = 2.0 * np.pi / n_steps
    a = _trig_at(coeffs, 0.5 * h * np.arange(2 * n_steps + 1))
    a0, a1, a2 = a[0:-1:2], a[1::2], a[2::2]
    eye = np.eye(k, dtype=np.complex128)
    q1 = a0
    q2 = (eye + 0.5 * h * q1) @ a1
    q3 = (eye + 0.5 * h * q2) @ a1
    q4 = (eye + h * q3) @ a2
    P = eye + (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    while P.shape[0] > 1:
        if P.shape[0] % 2:
            P = np.concatenate([P, eye[None]])
        P = P[0::2] @ P[1::2]
    return P[0]


def transport_dopri5(coeffs, rtol, atol, max_steps):
    """Integrate ``Y' = Y a(theta)`` on ``[0, 2*pi]`` from ``Y(0) = I``.

    Returns ``(Y(2*pi), accepted_steps, status)``; status 0 is success,
    1 means the step budget was exhausted, 2 means the step size underflowed.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    if USE_NUMBA:
        return _dopri5_loops(coeffs, rtol, atol, max_steps)
    return _dopri5_numpy(coeffs, rtol, atol, max_steps)


def transport_rk4(coeffs, n_steps):
    """Classical fixed-step RK4 for the same transport equation."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    if USE_NUMBA:
        return _rk4_loops(coeffs, n_steps)
    return _rk4_numpy(coeffs, n_steps)


@jit
def _galerkin_assemble_loops(first, zeroth, M):
    dp = (first.shape[0] - 1) // 2
    dr = (zeroth.shape[0] - 1) // 2
    k = first.shape[1]
    size = 2 * M + 1
    G = np.zeros((size * k, size * k), dtype=np.complex128)
    for i in range(size):
        m = i - M
        for j in range(size):
            n = j - M
            diff = m - n
            if diff == 0:
                for a in range(k):
                    G[i * k + a, j * k + a] += n * n
            if -dp <= diff <= dp:
                for a in range(k):
                    for b in range(k):
                        G[i * k + a, j * k + b] += 1j * n * first[diff + dp, a, b]
            if -dr <= diff <= dr:
                for a in range(k):
                    for b in range(k):
                        G[i * k + a, j * k + b] += zeroth[diff + dr, a, b]
    return G


def _galerkin_assemble_numpy(first, zeroth, M):
    k = first.shape[1]
    size = 2 * M + 1
    modes = np.arange(-M, M + 1)
    diff = modes[:, None] - modes[None, :]

    def padded(coeffs):
        deg = (coeffs.shape[0] - 1) // 2
        full = np.zeros((4 * M + 1, k, k), dtype=np.complex128)
        lo, hi = max(-deg, -2 * M), min(deg, 2 * M)
        full[lo + 2 * M:hi + 2 * M + 1] = coeffs[lo + deg:hi + deg + 1]
        return full[diff + 2 * M]

    blocks = 1j * modes[None, :, None, None] * padded(first) + padded(zeroth)
    blocks[np.arange(size), np.arange(size)] += (modes ** 2)[:, None, None] * np.eye(k)
    return blocks.transpose(0, 2, 1, 3).reshape(size * k, size * k)


def galerkin_assemble(first, zeroth, M):
    """Fourier-Galerkin matrix of ``-d^2 + first * d + zeroth`` on modes ``|m| <= M``.

    Row/column ``m*k + a`` (shifted by ``M``) pairs mode ``e^{i m theta}`` with
    fiber index ``a``.
    """
    first = np.ascontiguousarray(first, dtype=np.complex128)
    zeroth = np.ascontiguousarray(zeroth, dtype=np.complex128)
    if USE_NUMBA:
        return _galerkin_assemble_loops(first, zeroth, M)
    return _galerkin_assemble_numpy(first, zeroth, M)
