"""Desk-scale Full-CI / Full-CC engine with computable well-posedness constants."""

from .cluster import (
    AmplitudeVector,
    NormMetric,
    build_norm_metric,
    cc_to_ci,
    ci_to_cc,
    cluster_apply,
    cluster_adjoint_apply,
    dual_norm,
    exp_apply,
    get_excitation_table,
    vnorm,
)
from .determinants import (
    PAPER_SIGNLESS,
    SECOND_QUANTIZED,
    DeterminantSpace,
    ExcitationIndex,
    apply_deexcitation,
    apply_excitation,
    enumerate_determinants,
    enumerate_excitations,
    excitation_between,
    excitations_for_space,
)
from .equations import (
    SolverOptions,
    cc_jacobian,
    cc_residual,
    newton_solve,
)
from .hamiltonian import (
    Eigenpair,
    FciHamiltonian,
    assemble,
    davidson,
    hf_energy,
    slater_condon_element,
    solve_eigenpair,
)
from .integrals import (
    IntegralTable,
    SpinOrbitalIntegrals,
    parse_fcidump,
    spinify,
    write_fcidump,
)

__version__ = "0.1.0"
