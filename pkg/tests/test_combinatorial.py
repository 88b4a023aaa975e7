import numpy as np
import pytest

from helpers import crandn, random_bundle
from torsionlab.circle_analytic import (CircleBundle, CoEulerStructureS1, EulerStructureS1, monodromy)
from torsionlab.combinatorial import (MappingTorusInput, combinatorial_torsion_circle,
                                      lefschetz_log_series, lefschetz_zeta, mapping_torus_torsion,
                                      morse_complex_circle, poincare_dual_circle, relative_torsion,
                                      supertrace_powers, theta)
from torsionlab.complex_torsion import is_acyclic, torsion_direct
from torsionlab.errors import NotAcyclicError, ValidationError, ZetaPoleError

TORUS = (np.eye(1), np.array([[2.0, 1.0], [1.0, 1.0]]), np.eye(1))
GOLDEN = (3 + np.sqrt(5)) / 2


# Morse complex and combinatorial torsion

def test_morse_complex_shapes():
    C, b = morse_complex_circle(np.array([[2.0]]))
    assert C.dims == (1, 1) and is_acyclic(C)
    np.testing.assert_allclose(C.d(0), [[1.0]])
    C, _ = morse_complex_circle(np.eye(2))
    assert not is_acyclic(C) and np.all(C.d(0) == 0)


def test_morse_route_closed_form():
    tau = combinatorial_torsion_circle(np.diag([2.0, 3.0]))
    assert abs(tau.value - 0.25) <= 1e-12


def test_morse_route_random(rng):
    for _ in range(20):
        A = crandn(rng, 3, 3)
        if abs(np.linalg.det(A - np.eye(3))) < 0.1:
            continue
        C, b = morse_complex_circle(A)
        expected = np.linalg.det(A - np.eye(3)) ** -2
        assert abs(torsion_direct(C, b).value / expected - 1) <= 1e-10


def test_euler_offsets():
    A = np.array([[2.0]])
    assert abs(combinatorial_torsion_circle(A).value - 1) <= 1e-12
    assert abs(combinatorial_torsion_circle(A, EulerStructureS1(1)).value - 4) <= 1e-12
    assert theta(A, -2) == 0.25


def test_euler_equivariance(rng):
    A = crandn(rng, 2, 2)
    base = combinatorial_torsion_circle(A).value
    for sigma in range(-2, 3):
        shifted = combinatorial_torsion_circle(A, EulerStructureS1(sigma)).value
        assert abs(shifted / (base * np.linalg.det(A) ** (2 * sigma)) - 1) <= 1e-12


def test_identity_holonomy_not_acyclic():
    with pytest.raises(NotAcyclicError):
        combinatorial_torsion_circle(np.eye(1))


def test_poincare_duality():
    assert poincare_dual_circle(EulerStructureS1()) == CoEulerStructureS1.base()
    assert poincare_dual_circle(EulerStructureS1(1)).offset == 1
    for s, t in [(-2, 1), (0, 3)]:
        diff = poincare_dual_circle(EulerStructureS1(t)).offset - poincare_dual_circle(EulerStructureS1(s)).offset
        assert diff == t - s


# mapping tori

def test_mapping_torus_validation():
    with pytest.raises(ValidationError, match="not_square"):
        MappingTorusInput((np.ones((1, 2)),), 0.5)
    with pytest.raises(ValidationError, match="not_invertible"):
        MappingTorusInput((np.zeros((1, 1)),), 0.5)
    with pytest.raises(ValidationError, match="z_zero"):
        MappingTorusInput((np.eye(1),), 0)


def test_point_fiber_zeta():
    for z in (0.3, 3, 2j):
        zeta = lefschetz_zeta(MappingTorusInput((np.eye(1),), z))
        assert abs(zeta - 1 / (1 - z)) <= 1e-14
    # z = 0 is the empty product
    assert lefschetz_log_series([np.eye(1)], 0.0, 12) == 0


@pytest.mark.parametrize("z", [3, 2j, 0.5])
def test_point_fiber_matches_circle(z):
    tau = mapping_torus_torsion(MappingTorusInput((np.eye(1),), z)).value
    circle = combinatorial_torsion_circle(np.array([[z]])).value
    assert abs(tau / circle - 1) <= 1e-10
    assert abs(tau - (1 - z) ** -2) <= 1e-10 * abs(tau)


def test_torus_anosov():
    inp = MappingTorusInput(TORUS, 0.5)
    assert abs(lefschetz_zeta(inp) + 1) <= 1e-10
    assert abs(mapping_torus_torsion(inp).value - 1) <= 1e-10
    z = 0.3
    expected = (1 - 3 * z + z * z) / (1 - z) ** 2
    assert abs(lefschetz_zeta(inp.with_z(z)) - expected) <= 1e-12


def test_zeta_pole():
    with pytest.raises(ZetaPoleError):
        lefschetz_zeta(MappingTorusInput((np.eye(1),), 1.0))
    with pytest.raises(NotAcyclicError):
        mapping_torus_torsion(MappingTorusInput((np.eye(1),), 1.0))


def test_supertraces_torus():
    st = supertrace_powers(TORUS, 5)
    j = np.arange(1, 6)
    np.testing.assert_allclose(st, 2 - GOLDEN ** j - GOLDEN ** -j, rtol=1e-12)


@pytest.mark.parametrize("z", [0.1, 0.2, -0.15j])
def test_series_identity_bounded_spectrum(z, rng):
    # fibers whose phi* has spectral radius 1 keep the order-12 remainder tiny
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    for phi in ([np.eye(1)], [np.eye(1), rot, np.eye(1)], [np.eye(1), -np.eye(3)]):
        closed = np.log(lefschetz_zeta(MappingTorusInput(tuple(phi), z)))
        assert abs(lefschetz_log_series(phi, z, 12) - closed) <= 1e-9


@pytest.mark.parametrize("z", [0.1, 0.2])
def test_series_remainder_equals_analytic_tail(z):
    # for the hyperbolic torus fiber the order-K remainder is the explicit tail
    closed = np.log(lefschetz_zeta(MappingTorusInput(TORUS, z)))
    for order in (12, 16, 20):
        remainder = closed - lefschetz_log_series(TORUS, z, order)
        j = np.arange(order + 1, 400)
        tail = np.sum((2 - GOLDEN ** j - GOLDEN ** -j) * z ** j / j)
        assert abs(remainder - tail) <= 1e-12 * max(abs(tail), 1e-3)


def test_series_torus_reaches_tolerance_at_higher_order():
    closed = np.log(lefschetz_zeta(MappingTorusInput(TORUS, 0.1)))
    assert abs(lefschetz_log_series(TORUS, 0.1, 16) - closed) <= 1e-9


# relative torsion

def test_relative_torsion_constant():
    rep = relative_torsion(CircleBundle.constant(0.3))
    assert rep.unit_deviation <= 1e-8 and rep.modulus_deviation <= 1e-8


def test_relative_torsion_random_identity_form(rng):
    for _ in range(3):
        B = random_bundle(rng, k=2, b_degree=0, winding=0)
        assert relative_torsion(B).modulus_deviation <= 1e-6


def test_relative_torsion_random_form(rng):
    for _ in range(3):
        B = random_bundle(rng, k=2, b_degree=2)
        assert relative_torsion(B).unit_deviation <= 1e-6


def test_relative_torsion_independent_of_euler_structure(rng):
    B = random_bundle(rng, k=2, b_degree=3, winding=1)
    H = monodromy(B)
    S0 = relative_torsion(B, holonomy=H).S
    for sigma in range(-2, 3):
        S = relative_torsion(B, EulerStructureS1(sigma), holonomy=H).S
        assert abs(S / S0 - 1) <= 1e-8


def test_relative_torsion_not_acyclic():
    with pytest.raises(NotAcyclicError):
        relative_torsion(CircleBundle.constant(0.0))
