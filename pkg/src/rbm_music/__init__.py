"""Restricted Boltzmann machine toolkit for piano-roll music."""

from .rbm import (
    RbmParams,
    energy,
    exact_marginal,
    exact_partition,
    free_energy,
    gibbs_chain,
    hidden_conditional,
    make_rng,
    sample_bernoulli,
    visible_conditional,
)
from .trainer import TrainConfig, TrainReport, cd_gradient, exact_gradient, exact_kl, reconstruct, train
from .composer import ComposeConfig, compose_piece, compose_window, extend_window

__version__ = "0.1.0"
