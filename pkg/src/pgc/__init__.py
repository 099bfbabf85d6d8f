"""Phase-group certification for bimodule quantum channels on finite-index
multi-matrix inclusions.

The library realizes, at finite dimension, the tower of a Markov inclusion
N in M, the two-box Fourier calculus on its relative commutants, bimodule
channels in synchronized representations, and the peripheral spectral
program: Perron-Frobenius data, phase groups with eigenspace unitaries,
relative irreducibility, and the biprojection engine.  Every theorem-shaped
claim is emitted as a checkable residual inside a deterministic certificate.
"""

__version__ = "0.1.0"

from .algebra import (
    AlgebraElement,
    GnsRepresentation,
    MultiMatrixAlgebra,
    center_and_factor,
    commutant,
    make_algebra,
    polar_decomposition,
    range_projection,
    spectral_decomposition,
)
from .channel import (
    BimoduleChannel,
    channel_adjoint,
    channel_compose,
    channel_convolve,
    channel_from_action,
    channel_from_kraus,
    channel_from_y,
    choi_matrix,
    expectation_channel,
    fourier_multiplier,
    identity_channel,
    is_cp,
    pp_dominance,
    unitalize,
    y_from_channel,
)
from .certify import Certificate, run_analyze, run_qfa_check
from .instances import InstanceSpec, generate, parse_instance
from .qfa import (
    PeripheralDecomposition,
    TwoBiprojectionReport,
    TwoBoxElement,
    biprojection_generated,
    contragredient,
    convolve,
    fourier,
    fourier_inv,
    is_biprojection,
    peripheral_decomposition,
    shift_check,
    split_lemma_check,
    sum_set_S,
    two_biprojection_check,
)
from .spectral import (
    FixedStructure,
    PhaseGroupCertificate,
    SpectralReport,
    certify_phase_group,
    cesaro_fixed,
    channel_spectrum,
    collatz_wielandt_check,
    commuting_pf_channel,
    eigenspace,
    invariant_state,
    perron_vector,
    relative_irreducibility,
    unitary_generator,
)
from .tower import (
    Embedding,
    JonesTower,
    UnitalInclusion,
    basic_construction,
    conditional_expectation,
    markov_data,
    pp_basis,
    pp_inequality_check,
    relative_commutant,
)
