"""Hamiltonian Monte Carlo, NUTS, and SpreadNUTS samplers with a Gaussian-mixture benchmark."""

from .dynamics import MassSpec, PhasePoint, hamiltonian, kinetic_energy, leapfrog_step, potential_energy
from .kdtree import SpatialIndex
from .mixture import (
    GaussianComponent,
    GaussianMixture,
    load_mixture,
    log_sum_exp,
    mixture_grad_log_density,
    mixture_log_density,
    sample_direct,
    standard_normal,
    two_island_mixture,
)
from .nuts import NUTS, SamplerConfig, find_reasonable_epsilon, nuts_draw
from .spread import SpreadConfig, SpreadNUTS, spread_nuts_draw

__version__ = "0.1.0"
