"""
Service layer for state algebra shared by the passage and dynamics apps.
"""
import numpy as np
from django.core.exceptions import ValidationError

from .models import PureState, DensityMatrix, DensityDiagnostics


class StateService:
    """Overlaps, populations and density-matrix diagnostics."""

    @classmethod
    def normalize(cls, state: PureState) -> PureState:
        """Return the state scaled to unit norm."""
        norm = state.norm
        if norm == 0.0:
            raise ValidationError("Cannot normalize the zero vector.")
        if norm == 1.0:
            return state
        return PureState(state.amplitudes / norm)

    @classmethod
    def fidelity(cls, a: PureState, b: PureState) -> float:
        """Return |<a|b>|^2."""
        if a.dims != b.dims:
            raise ValidationError(f"Dimension mismatch: {a.dims} vs {b.dims}.")
        overlap = np.vdot(a.amplitudes, b.amplitudes)
        return float(min(1.0, abs(overlap) ** 2))

    @classmethod
    def population(cls, state, level: int) -> float:
        """
        Return the occupation of a level.

        Args:
            state: PureState or DensityMatrix
            level (int): level index, 0-based

        Returns:
            float: |c_level|^2 for pure states, Re(rho_ll) for density matrices
        """
        if not 0 <= level < state.dims:
            raise ValidationError(f"Level {level} out of range for dimension {state.dims}.")
        if isinstance(state, DensityMatrix):
            return float(state.elements[level, level].real)
        return float(abs(state.amplitudes[level]) ** 2)

    @classmethod
    def populations(cls, state) -> np.ndarray:
        """Return all level occupations."""
        if isinstance(state, DensityMatrix):
            return np.real(np.diagonal(state.elements)).copy()
        return np.abs(state.amplitudes) ** 2

    @classmethod
    def check_density(cls, rho: DensityMatrix) -> DensityDiagnostics:
        """Measure Hermiticity, trace and positivity defects."""
        elements = rho.elements
        hermiticity_defect = float(np.max(np.abs(elements - elements.conj().T), initial=0.0))
        trace_defect = float(abs(np.trace(elements) - 1.0))
        hermitian_part = 0.5 * (elements + elements.conj().T)
        min_eigenvalue = float(np.linalg.eigvalsh(hermitian_part)[0])
        return DensityDiagnostics(
            hermiticity_defect=hermiticity_defect,
            trace_defect=trace_defect,
            min_eigenvalue=min_eigenvalue,
        )

    @classmethod
    def ket_bra(cls, row: int, col: int, dims: int) -> np.ndarray:
        """Return the matrix unit |row><col|."""
        unit = np.zeros((dims, dims), dtype=complex)
        unit[row, col] = 1.0
        return unit
