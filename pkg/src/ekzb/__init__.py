"""Universal elliptic KZB connection at level N, truncated to finite degree.

Numerical core for the coefficient functions (Eisenstein series of level N,
Kronecker-kernel expansions), the connection form on the once-punctured
universal elliptic curve with level structure, its flatness and modular
invariance checks, monodromy transport, degeneration to the cyclotomic
KZ form, and the Hodge/weight filtration bookkeeping on the fiber.
"""

__version__ = "0.1.0"

from .series import NCSeries, GEN_X, GEN_Y, gen_t, gen_point, gen_count
from .torsion import (TorsionPoint, torsion_group, torsion_nonzero,
                      gamma_generators)
from .lie import (Derivation, Automorphism, lyndon_words, lyndon_bracketing,
                  lyndon_coordinates, bch, log_trunc, exp_trunc)
from .eisenstein import (eisenstein_value, eisenstein_cusp,
                         eisenstein_qexp_torsion, eisenstein_lattice_grid)
from .jacobi import kronecker_laurent, section_kernels, a_coeffs, verify_heat
from .connection import (KZBContext, ConnectionValue, omega, automorphy,
                         invariance_residual, curvature_residual,
                         residue_cusp, residue_torsion, t0_welldef_residual,
                         restrict_singular_fiber, kz_form, degeneration_check)
from .monodromy import (FiberPath, TransportResult, transport_inverse,
                        monodromy_grouplike, psi_tau, standard_loops,
                        homology_check, monodromy_rank_check, kz_transport)
from .hodge import (filtration_levels, derivation_filtration_levels,
                    automorphism_filtration_levels, weight_basis,
                    graded_basis, sl2_multiplicities, sl2_iso_check,
                    realized_pairs, cusp_sl2_operators)
from .qcache import QSeries, cache_get, cache_put, cache_list
from .report import Report, CheckRecord

__all__ = [
    "NCSeries", "GEN_X", "GEN_Y", "gen_t", "gen_point", "gen_count",
    "TorsionPoint", "torsion_group", "torsion_nonzero", "gamma_generators",
    "Derivation", "Automorphism", "lyndon_words", "lyndon_bracketing",
    "lyndon_coordinates", "bch", "log_trunc", "exp_trunc",
    "eisenstein_value", "eisenstein_cusp", "eisenstein_qexp_torsion",
    "eisenstein_lattice_grid",
    "kronecker_laurent", "section_kernels", "a_coeffs", "verify_heat",
    "KZBContext", "ConnectionValue", "omega", "automorphy",
    "invariance_residual", "curvature_residual", "residue_cusp",
    "residue_torsion", "t0_welldef_residual", "restrict_singular_fiber",
    "kz_form", "degeneration_check",
    "FiberPath", "TransportResult", "transport_inverse",
    "monodromy_grouplike", "psi_tau", "standard_loops", "homology_check",
    "monodromy_rank_check", "kz_transport",
    "filtration_levels", "derivation_filtration_levels",
    "automorphism_filtration_levels", "weight_basis", "graded_basis",
    "sl2_multiplicities", "sl2_iso_check", "realized_pairs",
    "cusp_sl2_operators",
    "QSeries", "cache_get", "cache_put", "cache_list",
    "Report", "CheckRecord",
    "__version__",
]
