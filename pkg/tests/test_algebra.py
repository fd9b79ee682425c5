import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcal import algebra
from bellcal.algebra import (
    CompositeState,
    JonesVector,
    ModeTag,
    Operator,
    Path,
    Source,
    Support,
    commutator,
    equal_up_to_phase,
    expectation,
    identity,
    normalize,
    schmidt_rank,
    tensor,
)
from bellcal.chsh import sigma_observable
from bellcal.errors import NonHermitian, TagConflict, ZeroNorm

from conftest import S, random_state

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
jones_components = st.tuples(finite, finite, finite, finite).filter(
    lambda t: sum(x * x for x in t) > 1e-6)


class TestNormalize:
    def test_already_normalized(self):
        out = normalize(JonesVector.of(1, 0))
        np.testing.assert_array_equal(out.components, [1, 0])
        assert out.intensity == 1.0

    def test_symmetric(self):
        out = normalize(JonesVector.of(1, 1))
        np.testing.assert_allclose(out.components, [S, S], atol=1e-15)
        assert out.intensity == pytest.approx(2.0)

    def test_three_four_five(self):
        out = normalize(JonesVector.of(3 + 4j, 0))
        np.testing.assert_allclose(out.components, [(3 + 4j) / 5, 0], atol=1e-15)
        assert out.intensity == pytest.approx(25.0)

    def test_composite(self):
        out = normalize(CompositeState([1, 0, 0, 1]))
        np.testing.assert_allclose(out.amplitudes, [S, 0, 0, S])

    def test_zero_norm(self):
        with pytest.raises(ZeroNorm):
            normalize(JonesVector.of(1e-16, 0))

    @given(jones_components)
    def test_idempotent_exactly(self, c):
        x = normalize(JonesVector.of(c[0] + 1j * c[1], c[2] + 1j * c[3]))
        assert normalize(x) == x
        assert abs(x.norm_sq - 1) < 1e-12

    @given(jones_components)
    def test_direction_preserved(self, c):
        v = JonesVector.of(c[0] + 1j * c[1], c[2] + 1j * c[3])
        out = normalize(v)
        np.testing.assert_allclose(out.components * np.sqrt(v.norm_sq), v.components,
                                   rtol=1e-12, atol=1e-9)


class TestTensor:
    def test_basis_product(self):
        s = tensor(JonesVector.of(1, 0), JonesVector.of(1, 0))
        np.testing.assert_array_equal(s.amplitudes, [1, 0, 0, 0])

    def test_hadamard_then_zero(self):
        s = tensor(JonesVector.of(S, S), JonesVector.of(1, 0))
        np.testing.assert_allclose(s.amplitudes, [S, 0, S, 0], atol=1e-15)

    def test_one_then_hadamard(self):
        s = tensor(JonesVector.of(0, 1), JonesVector.of(S, S))
        np.testing.assert_allclose(s.amplitudes, [0, 0, S, S], atol=1e-15)

    def test_tags_propagate(self):
        a = JonesVector.of(S, S, ModeTag(Source.S1, Path.A))
        b = JonesVector.of(1, 0, ModeTag(Source.S2, Path.B))
        s = tensor(a, b)
        assert set(s.mode_tags) == {(0, 0), (1, 0)}
        assert s.mode_tags[(0, 0)][0].source is Source.S1
        assert s.mode_tags[(1, 0)][1].path is Path.B

    def test_same_path_conflict(self):
        a = JonesVector.of(1, 0, ModeTag(Source.S1, Path.A))
        b = JonesVector.of(1, 0, ModeTag(Source.S2, Path.A))
        with pytest.raises(TagConflict):
            tensor(a, b)

    def test_swapped_paths_conflict(self):
        a = JonesVector.of(1, 0, ModeTag(Source.S1, Path.B))
        b = JonesVector.of(1, 0, ModeTag(Source.S2, Path.A))
        with pytest.raises(TagConflict):
            tensor(a, b)

    def test_normalized_output(self, rng):
        for _ in range(50):
            a = normalize(JonesVector(rng.normal(size=2) + 1j * rng.normal(size=2)))
            b = normalize(JonesVector(rng.normal(size=2) + 1j * rng.normal(size=2)))
            assert abs(tensor(a, b).norm_sq - 1) < 1e-12


class TestSchmidtRank:
    def test_bell(self):
        assert schmidt_rank(CompositeState([S, 0, 0, S])) == 2

    def test_separable_superposition(self):
        assert schmidt_rank(CompositeState([S, 0, S, 0])) == 1

    def test_basis_state(self):
        assert schmidt_rank(CompositeState([0, 1, 0, 0])) == 1

    def test_global_phase_invariance(self, rng, phi_plus):
        prod = tensor(normalize(JonesVector([1, 2j])), normalize(JonesVector([3, -1])))
        for chi in rng.uniform(0, 2 * np.pi, 16):
            phase = np.exp(1j * chi)
            assert schmidt_rank(CompositeState(phi_plus.amplitudes * phase)) == 2
            assert schmidt_rank(CompositeState(prod.amplitudes * phase)) == 1

    def test_threshold_is_overridable(self, monkeypatch):
        almost = normalize(CompositeState([1, 0, 0, 1e-8]))
        assert schmidt_rank(almost) == 2
        monkeypatch.setattr(algebra, "SCHMIDT_TOL", 1e-6)
        assert schmidt_rank(almost) == 1


class TestExpectation:
    def test_identity(self, rng):
        for _ in range(10):
            assert expectation(random_state(rng), identity()) == pytest.approx(1.0, abs=1e-12)

    def test_sigma_zero_zero_on_bell(self, phi_plus):
        op = sigma_observable(0, "a") @ sigma_observable(0, "b")
        assert expectation(phi_plus, op) == pytest.approx(1.0, abs=1e-12)

    def test_sigma_quarter_turn_on_bell(self, phi_plus):
        op = sigma_observable(np.pi / 2, "a") @ sigma_observable(0, "b")
        assert expectation(phi_plus, op) == pytest.approx(0.0, abs=1e-12)

    def test_non_hermitian(self, phi_plus):
        with pytest.raises(NonHermitian):
            expectation(phi_plus, Operator(np.triu(np.ones((4, 4)))))

    def test_hermitian_gives_real(self, rng):
        for _ in range(100):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            op = Operator(a + a.conj().T)
            s = random_state(rng)
            exact = np.vdot(s.amplitudes, op.matrix @ s.amplitudes)
            assert abs(exact.imag) < 1e-10
            assert expectation(s, op) == pytest.approx(exact.real, abs=1e-12)

    def test_single_beam(self):
        v = normalize(JonesVector.of(1, 1))
        op = Operator(np.array([[0, 1], [1, 0]]), Support.PATH_A)
        assert expectation(v, op) == pytest.approx(1.0)


def test_local_operators_commute():
    grid = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    for t in grid:
        for p in grid:
            c = commutator(sigma_observable(t, "a"), sigma_observable(p, "b"))
            assert np.linalg.norm(c) < 1e-12


def test_operator_lift_matches_kron():
    m = np.array([[1, 2j], [-2j, 3]])
    np.testing.assert_array_equal(Operator(m, Support.PATH_A).full(), np.kron(m, np.eye(2)))
    np.testing.assert_array_equal(Operator(m, Support.PATH_B).full(), np.kron(np.eye(2), m))


def test_global_phase_equality(phi_plus):
    shifted = CompositeState(phi_plus.amplitudes * np.exp(0.7j))
    assert equal_up_to_phase(shifted, phi_plus)
    relative = CompositeState(np.array([1j * S, 0, 0, -1j * S]))
    assert not equal_up_to_phase(relative, phi_plus)


def test_states_are_immutable(phi_plus):
    with pytest.raises(ValueError):
        phi_plus.amplitudes[0] = 0


def test_untagged_term_rejected():
    tag = (ModeTag(Source.S1, Path.A), ModeTag(Source.S2, Path.B))
    with pytest.raises(TagConflict):
        CompositeState([S, 0, 0, S], mode_tags={(0, 0): tag})


def test_mode_tag_frequency_is_fixed_by_source():
    assert ModeTag(Source.S2).frequency is algebra.Frequency.OMEGA2
    with pytest.raises(ValueError):
        ModeTag(Source.S1, frequency=algebra.Frequency.OMEGA2)


@settings(max_examples=50)
@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_product_of_normalized_is_normalized(a, b):
    s = tensor(JonesVector.of(np.cos(a), np.sin(a)), JonesVector.of(np.cos(b), 1j * np.sin(b)))
    assert abs(s.norm_sq - 1) < 1e-12
