"""
State and operator types for the qutrit (plus leakage level) Hilbert space.
"""
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError


def _frozen_array(values, ndim):
    array = np.array(values, dtype=complex)
    if array.ndim != ndim:
        raise ValidationError(f"Expected a {ndim}-d array, got shape {array.shape}.")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PureState:
    """
    Vector of probability amplitudes over |0>, |1>, |2> (and |3>).
    """

    DIMS_QUTRIT = 3
    DIMS_LEAKAGE = 4

    DIMS_CHOICES = [
        (DIMS_QUTRIT, "Qutrit"),
        (DIMS_LEAKAGE, "Qutrit with leakage level"),
    ]

    NORM_TOLERANCE = 1e-9

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen_array(self.amplitudes, 1))
        self.clean()

    def clean(self):
        """Validate dimension and finiteness."""
        if self.dims not in dict(self.DIMS_CHOICES):
            raise ValidationError(f"State dimension must be 3 or 4, got {self.dims}.")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValidationError("State amplitudes must be finite.")

    @classmethod
    def basis(cls, level, dims=DIMS_QUTRIT):
        """Return the basis ket |level>."""
        if not 0 <= level < dims:
            raise ValidationError(f"Level {level} out of range for dimension {dims}.")
        amplitudes = np.zeros(dims, dtype=complex)
        amplitudes[level] = 1.0
        return cls(amplitudes)

    @property
    def dims(self):
        return self.amplitudes.shape[0]

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self):
        return abs(self.norm - 1.0) <= self.NORM_TOLERANCE

    def __str__(self):
        terms = " ".join(f"{c:+.4f}|{k}>" for k, c in enumerate(self.amplitudes))
        return f"PureState({terms})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Carrier of the master-equation state.
    """

    HERMITICITY_TOLERANCE = 1e-9
    TRACE_TOLERANCE = 1e-9
    POSITIVITY_TOLERANCE = 1e-8

    elements: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elements", _frozen_array(self.elements, 2))
        rows, cols = self.elements.shape
        if rows != cols:
            raise ValidationError(f"Density matrix must be square, got {rows}x{cols}.")

    @classmethod
    def from_pure(cls, state):
        """Return the projector |psi><psi|."""
        return cls(np.outer(state.amplitudes, state.amplitudes.conj()))

    @property
    def dims(self):
        return self.elements.shape[0]

    def clean(self):
        """Validate Hermiticity, unit trace and positivity."""
        from qstate.services import StateService

        diagnostics = StateService.check_density(self)
        if self.dims not in dict(PureState.DIMS_CHOICES):
            raise ValidationError(f"Density matrix dimension must be 3 or 4, got {self.dims}.")
        if diagnostics.hermiticity_defect > self.HERMITICITY_TOLERANCE:
            raise ValidationError(
                f"Density matrix is not Hermitian (defect {diagnostics.hermiticity_defect:.3e})."
            )
        if diagnostics.trace_defect > self.TRACE_TOLERANCE:
            raise ValidationError(f"Density matrix trace differs from 1 by {diagnostics.trace_defect:.3e}.")
        if diagnostics.min_eigenvalue < -self.POSITIVITY_TOLERANCE:
            raise ValidationError(
                f"Density matrix is not positive (min eigenvalue {diagnostics.min_eigenvalue:.3e})."
            )


@dataclass(frozen=True, eq=False)
class Operator:
    """
    Dense d x d operator; Hamiltonians are in rad/ns with hbar = 1.
    """

    HERMITIAN_TOLERANCE = 1e-12

    elements: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "elements", _frozen_array(self.elements, 2))

    @property
    def dims(self):
        return self.elements.shape[0]

    @property
    def is_hermitian(self):
        return bool(np.max(np.abs(self.elements - self.elements.conj().T), initial=0.0) <= self.HERMITIAN_TOLERANCE)


@dataclass(frozen=True)
class DensityDiagnostics:
    """Defect measures of a density matrix."""

    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
