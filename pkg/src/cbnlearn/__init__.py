"""Discrete causal Bayesian networks with latent confounders.

Learn full CBNs from observational data with EM and a BIC search over the
latent cardinality, then answer P(Y | do(X)) by exact inference on the
truncated model. An ID-based plug-in estimator is included as a baseline.
"""
from .errors import CbnError
from .factor import Factor, factor_marginalize, factor_product, factor_restrict
from .inference import EliminationOrder, brute_force_marginal, eliminate, marginal, min_fill_order
from .model import (
    Admg,
    Cbn,
    CausalDiagram,
    Cpt,
    Kind,
    Query,
    Variable,
    latentify_sources,
    load_model,
    project_to_admg,
    save_model,
    topological_order,
    truncate,
)
from .sampling import Dataset, GenSpec, forward_sample, generate_structure, random_cpts

__version__ = "0.1.0"
