"""Computable thermodynamic formalism on subshifts of finite type:
topological pressure, constrained entropy spectra, level-set pressure and
dimension formulas, synthesis of orbits with prescribed accumulation sets,
and Hausdorff dimensions for recurrent iterated function systems.
"""

from ._kernels import BACKEND as kernel_backend
from .sft import Potential, SubshiftSpec, Word, d_phi_distance, enumerate_words, primitivity
from .measures import (
    EmpiricalMeasure,
    MarkovMeasure,
    birkhoff_average,
    empirical_measure,
    entropy,
    integrate,
    rho_distance,
    stationary_distribution,
)

__version__ = "0.1.0"
