"""Vector-perturbation precoding simulator for multiuser MISO downlinks.

Implements conventional (channel-inversion) vector perturbation, its MMSE
variant, and a robust variant that tolerates errors in the power scaling
factor delivered to the receivers, together with an exact sphere-search
perturbation solver and a reproducible Monte Carlo BER harness.
"""

from .lattice import LatticeProblem, PerturbationSolution, brute_force_perturbation, sphere_decode
from .link import (
    BETA_EXACT,
    BETA_FIXED_SQR,
    BETA_NOISE_ADAPTIVE,
    BetaErrorModel,
    ChannelRealization,
    NoiseConfig,
    apply_channel,
    draw_channel,
    perturb_beta,
    receive,
)
from .modem import Constellation, demap, make_constellation, map_bits, modulo
from .montecarlo import (
    BerPoint,
    SimConfig,
    SweepError,
    TrialAborted,
    empirical_mse,
    run_trial,
    sweep,
)
from .precoding import (
    PerturbedFrame,
    PrecoderSet,
    SingularChannelError,
    analytic_mse,
    form_transmit,
    mmse_precoder,
    perturbed_frame,
    robust_precoder,
    solve_perturbation,
    triangular_factor,
    zf_precoder,
)

__version__ = "0.1.0"

__all__ = [
    "BETA_EXACT",
    "BETA_FIXED_SQR",
    "BETA_NOISE_ADAPTIVE",
    "BerPoint",
    "BetaErrorModel",
    "ChannelRealization",
    "Constellation",
    "LatticeProblem",
    "NoiseConfig",
    "PerturbationSolution",
    "PerturbedFrame",
    "PrecoderSet",
    "SimConfig",
    "SingularChannelError",
    "SweepError",
    "TrialAborted",
    "analytic_mse",
    "apply_channel",
    "brute_force_perturbation",
    "demap",
    "draw_channel",
    "empirical_mse",
    "form_transmit",
    "make_constellation",
    "map_bits",
    "mmse_precoder",
    "modulo",
    "perturb_beta",
    "perturbed_frame",
    "receive",
    "robust_precoder",
    "run_trial",
    "solve_perturbation",
    "sphere_decode",
    "sweep",
    "triangular_factor",
    "zf_precoder",
]
