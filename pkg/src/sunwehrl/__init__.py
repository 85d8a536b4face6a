"""Symmetric SU(N) representations, universal cloning channels and Wehrl-type entropies."""

__version__ = "0.1.0"

from .channels import (
    DecompositionConstants,
    HermitianOperator,
    cloning_apply,
    coherence_defect,
    coherent_output_levels,
    coherent_output_spectrum,
    decomposition_constants,
    directional_spectrum_fn,
    measure_prepare,
    normalized_cloning,
    random_density,
    random_state,
    reduced_density,
)
from .errors import IllConditionedFit, QuadratureError, ResourceLimitError
from .fock import (
    Ladder,
    OccupationVector,
    StateVector,
    SymmetricSpace,
    apply_ladder,
    coherent_vector,
    dimension,
    enumerate_basis,
)
from .majorization import ConcaveFn, SpectrumSequence, Verdict, karamata_gap, majorizes, spectrum
from .rep import GroupElement, commutant_dimension, symmetric_power, weight_generator
from .wehrl import (
    MonteCarloEstimate,
    berezin_lieb_gap,
    coherent_wehrl_closed_form,
    husimi,
    resolution_residual,
    sample_haar_state,
    semiclassical_trace,
    wehrl_entropy,
    wehrl_gap,
    wehrl_integral_mc,
)
