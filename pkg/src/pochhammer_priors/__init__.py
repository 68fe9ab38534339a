"""Pochhammer priors for sparse count models.

The PH prior on a Dirichlet concentration ``alpha`` has density proportional
to ``[alpha]^m / [c alpha + a]^b`` (rising factorials). Its normalizer,
moments and the posteriors it induces under Dirichlet-multinomial and related
count models are ratios of rising factorials, evaluated here by exact residue
expansions with precision escalation and a quadrature fallback.
"""

__version__ = "0.1.0"

from .dm import (
    Corpus,
    PosteriorChain,
    chain_summaries,
    homog_mh_sample,
    homog_posterior,
    homog_posterior_mean_alpha,
    homog_posterior_mean_pi,
    marginal_log_likelihood,
    mwg_sample,
)
from .errors import IntegrabilityError, MomentError, PochhammerError, PoleCollisionError, SizeBudgetError
from .numeric import Precision, SignedLogReal, integrate_halfline, log_rising, rng_suite
from .pochhammer import (
    HALF_HORSESHOE,
    Pochhammer,
    PochhammerParams,
    ph_cdf,
    ph_log_density,
    ph_moment,
    ph_quantile,
    ph_residues,
    ph_sample,
    pph_residues,
)
from .residues import RationalForm, ResidueExpansion, expand

__all__ = [
    "__version__",
    "Corpus",
    "PosteriorChain",
    "chain_summaries",
    "homog_mh_sample",
    "homog_posterior",
    "homog_posterior_mean_alpha",
    "homog_posterior_mean_pi",
    "marginal_log_likelihood",
    "mwg_sample",
    "IntegrabilityError",
    "MomentError",
    "PochhammerError",
    "PoleCollisionError",
    "SizeBudgetError",
    "Precision",
    "SignedLogReal",
    "integrate_halfline",
    "log_rising",
    "rng_suite",
    "HALF_HORSESHOE",
    "Pochhammer",
    "PochhammerParams",
    "ph_cdf",
    "ph_log_density",
    "ph_moment",
    "ph_quantile",
    "ph_residues",
    "ph_sample",
    "pph_residues",
    "RationalForm",
    "ResidueExpansion",
    "expand",
]
