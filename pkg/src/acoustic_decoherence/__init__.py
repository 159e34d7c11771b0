"""Decoherence and Hawking-pair correlations in 1+1D acoustic black holes
coupled to an ohmic quantum-Brownian-motion environment.

Units: ``c = hbar = k_B = 1`` unless overridden in :class:`PhysParams`.
"""

from .collapse import (CollapseProfile, Region, SigmaKind, classify_region,
                       hawking_temperature, left_mode, separatrix,
                       solve_characteristic, trace_back)
from .correlations import (CorrelationGrid, closed_correlation, momentum_minus,
                           open_correction, peak_metrics,
                           relative_environment_contribution)
from .decoherence import (DecoherenceResult, Method, decoherence_time_numeric,
                          decoherence_time_smallT, decoherence_time_T0,
                          gamma_factor, sweep)
from .environment import (OhmicBath, coupling_from_zeta, diffusion_coefficient,
                          diffusion_integral, dissipation_kernel, noise_kernel)
from .errors import *  # noqa: F401,F403
from .geometry import (Branch, ModeSpec, PhysParams, RingProfile,
                       allowed_frequencies, geometric_factor_V, null_coordinate,
                       profile_velocity)
from .stochastic import (NoiseRealization, green_retarded, langevin_realization,
                         mc_correlation, sample_noise)

__version__ = "0.1.0"
