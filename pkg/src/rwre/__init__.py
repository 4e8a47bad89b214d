"""Random walks in random environments on random trees.

Simulation, regime analysis and exact identities for nearest-neighbor
walks on weighted supercritical branching trees: classify an environment
law from its one-step moments, simulate the walk with online observables
(fully visited generations, deepest excursions, local times), compute
exact hitting quantities on frozen trees against independent linear-solve
oracles, and verify branching-sum identities by exact convolution.
"""

from .brw import (MaxPotentialRecord, TiltedStepLaw, martingale_mean,
                  max_potential_profile, sn_median, sn_tail_exact,
                  tilted_step_law, verify_many_to_one)
from .env import (ROOT, UNEXPANDED, VIRTUAL_PARENT, EnvironmentSpec,
                  OffspringLaw, TreeArena, ValidationReport, WeightLaw,
                  detect_extinction, load_env, save_env, spec_from_jsonable,
                  validate_spec)
from .errors import NumericalError, ResourceError, RwreError, UsageError
from .exact import (FrozenTree, HitTimeReport, beta_recursion,
                    expected_hit_time, freeze, gamma_recursion,
                    oracle_beta, oracle_expected_time, oracle_hit_prob,
                    oracle_rho, path_hit_prob_down, path_hit_prob_up, rho)
from .harness import (EXPONENT, RATIO, SLOPE, EstimateRecord, ExperimentPlan,
                      dyadic_grid, estimate_limit, run_plan)
from .regime import (PredictedConstants, RegimeReport, chi, classify,
                     gamma_tilde, j_tilde, kappa, psi, psi_prime, s_inf)
from .walk import (HIT_GENERATION, ROOT_RETURNS, STEPS, StopRule,
                   WalkObservables, run, transition_distribution,
                   update_largest_full_generation)

__version__ = "0.1.0"

__all__ = [
    "EnvironmentSpec", "OffspringLaw", "WeightLaw", "ValidationReport",
    "TreeArena", "validate_spec", "spec_from_jsonable", "load_env",
    "save_env", "detect_extinction", "VIRTUAL_PARENT", "ROOT", "UNEXPANDED",
    "RwreError", "UsageError", "ResourceError", "NumericalError",
    "psi", "psi_prime", "chi", "kappa", "s_inf", "j_tilde", "gamma_tilde",
    "classify", "RegimeReport", "PredictedConstants",
    "FrozenTree", "freeze", "path_hit_prob_up", "path_hit_prob_down",
    "beta_recursion", "rho", "gamma_recursion", "expected_hit_time",
    "HitTimeReport", "oracle_hit_prob", "oracle_expected_time",
    "oracle_beta", "oracle_rho",
    "StopRule", "WalkObservables", "run", "transition_distribution",
    "update_largest_full_generation", "STEPS", "ROOT_RETURNS",
    "HIT_GENERATION",
    "TiltedStepLaw", "MaxPotentialRecord", "tilted_step_law",
    "sn_tail_exact", "sn_median", "verify_many_to_one", "martingale_mean",
    "max_potential_profile",
    "ExperimentPlan", "EstimateRecord", "dyadic_grid", "run_plan",
    "estimate_limit", "RATIO", "SLOPE", "EXPONENT",
    "__version__",
]
