from chiralroute.errors import ConvergenceError, ValidationError
from chiralroute.hamiltonian import build_full_hamiltonian, build_reduced_hamiltonian
from chiralroute.types import (
    FullGraphLayout,
    OUSpec,
    RouterParams,
    SuperpositionGrid,
    SuperpositionParams,
    VonMisesSpec,
)
