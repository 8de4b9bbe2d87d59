import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from .models import PureState, DensityMatrix, Operator
from .services import StateService


def random_states(dims=3):
    component = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
    return st.lists(
        st.tuples(component, component), min_size=dims, max_size=dims
    ).filter(
        lambda pairs: sum(re * re + im * im for re, im in pairs) > 1e-3
    ).map(
        lambda pairs: StateService.normalize(PureState([complex(re, im) for re, im in pairs]))
    )


class FidelityTests(SimpleTestCase):

    def test_identical_basis_states(self):
        ket0 = PureState.basis(0)
        self.assertEqual(StateService.fidelity(ket0, ket0), 1.0)

    def test_orthogonal_basis_states(self):
        self.assertEqual(StateService.fidelity(PureState.basis(0), PureState.basis(2)), 0.0)

    def test_equal_superposition(self):
        plus = StateService.normalize(PureState([1, 0, 1]))
        self.assertAlmostEqual(StateService.fidelity(plus, PureState.basis(2)), 0.5, places=12)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValidationError):
            StateService.fidelity(PureState.basis(0, 3), PureState.basis(0, 4))

    @given(random_states(), random_states())
    @settings(max_examples=50, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        forward = StateService.fidelity(a, b)
        self.assertAlmostEqual(forward, StateService.fidelity(b, a), places=12)
        self.assertGreaterEqual(forward, 0.0)
        self.assertLessEqual(forward, 1.0)


class NormalizeTests(SimpleTestCase):

    @given(random_states(4))
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, state):
        once = StateService.normalize(state)
        twice = StateService.normalize(once)
        np.testing.assert_allclose(once.amplitudes, twice.amplitudes, atol=1e-15, rtol=0)
        self.assertTrue(once.is_normalized)

    def test_zero_vector_rejected(self):
        with self.assertRaises(ValidationError):
            StateService.normalize(PureState([0, 0, 0]))

    def test_dimension_must_be_three_or_four(self):
        with self.assertRaises(ValidationError):
            PureState([1, 0])


class PopulationTests(SimpleTestCase):

    def test_basis_state(self):
        self.assertEqual(StateService.population(PureState.basis(2), 2), 1.0)

    def test_diagonal_density_matrix(self):
        rho = DensityMatrix(np.diag([0.5, 0.3, 0.2]))
        self.assertAlmostEqual(StateService.population(rho, 1), 0.3, places=15)

    def test_sigmoid_passage_point(self):
        angle = math.pi / 8
        state = PureState([math.cos(angle), 0, -math.sin(angle)])
        self.assertAlmostEqual(StateService.population(state, 2), 0.1464466094, places=9)

    def test_level_out_of_range(self):
        with self.assertRaises(ValidationError):
            StateService.population(PureState.basis(0), 3)

    @given(random_states(4))
    @settings(max_examples=50, deadline=None)
    def test_populations_sum_to_one(self, state):
        self.assertAlmostEqual(float(np.sum(StateService.populations(state))), 1.0, delta=1e-9)
        rho = DensityMatrix.from_pure(state)
        self.assertAlmostEqual(float(np.sum(StateService.populations(rho))), 1.0, delta=1e-9)


class DensityDiagnosticsTests(SimpleTestCase):

    def test_maximally_mixed(self):
        diagnostics = StateService.check_density(DensityMatrix(np.eye(3) / 3))
        self.assertAlmostEqual(diagnostics.hermiticity_defect, 0.0)
        self.assertAlmostEqual(diagnostics.trace_defect, 0.0, places=15)
        self.assertAlmostEqual(diagnostics.min_eigenvalue, 1 / 3, places=12)

    def test_ground_state_projector(self):
        diagnostics = StateService.check_density(DensityMatrix(np.diag([1.0, 0.0, 0.0])))
        self.assertEqual(diagnostics.hermiticity_defect, 0.0)
        self.assertEqual(diagnostics.trace_defect, 0.0)
        self.assertAlmostEqual(diagnostics.min_eigenvalue, 0.0, places=15)

    def test_non_hermitian_perturbation(self):
        elements = np.diag([0.5, 0.5, 0.0]).astype(complex)
        elements[0, 1] += 1e-3
        diagnostics = StateService.check_density(DensityMatrix(elements))
        self.assertAlmostEqual(diagnostics.hermiticity_defect, 1e-3, places=12)

    def test_clean_rejects_bad_trace(self):
        with self.assertRaises(ValidationError):
            DensityMatrix(np.diag([0.5, 0.3, 0.1])).clean()

    def test_operator_hermiticity(self):
        self.assertTrue(Operator(np.array([[0, 1j], [-1j, 0]])).is_hermitian)
        self.assertFalse(Operator(np.array([[0, 1], [0, 0]])).is_hermitian)
