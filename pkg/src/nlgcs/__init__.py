"""Nonlinear generative compressed sensing at desk scale.

Library plus CLI for quantized/dithered observation models, generalized
Lasso recovery under a Lipschitz generative prior, and Monte-Carlo
verification of the framework's constructive lemmas and scaling laws.
"""

from .generator import (MlpGenerator, backward, forward, lipschitz_upper_bound,
                        load_weights, project_latent, random_generator, save_weights)
from .links import (DitherRealization, LinkSpec, LipschitzParams,
                    approx_error_eval, discontinuities_near, link_eval,
                    link_params, lipschitz_approx_eval, xi_eval)
from .recovery import (RecoveryResult, SolverFailure, SolverOptions,
                       cosine_similarity, generalized_lasso, relative_l2,
                       scaling_factor)
from .sensing import (SensingEnsemble, dump_ensemble, load_ensemble,
                      observe, sample_ensemble)
from .theory import (McEstimate, SrecParams, TheoryParams, entropy_bound,
                     gaussian_norm_concentration, mu_beta_mc,
                     product_process_sup, srec_empirical, target_mismatch_mc)

__version__ = "0.1.0"
