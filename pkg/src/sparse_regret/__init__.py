"""Regret minimization with sparse gains and losses.

Full-information learners (l^p mirror descent, exponential weights and their
sparsity-adaptive variants), a Tsallis-potential bandit learner, oblivious
adversaries including lower-bound constructions, and a seeded experiment
harness that checks empirical regret against closed-form guarantees.
"""

from .adversaries import AdversaryKind, AdversarySpec, OutcomeSequence, default_epsilon, generate
from .bandit import BanditState, LossEstimate, bandit_step, estimate_loss, sample_arm, tune_bandit
from .bounds import BoundPreconditionError, Setting, bound_table, theoretical_bound
from .core import Direction, RegretLedger, RngStream, SimplexDistribution, SparseOutcome, regret, sparsity, update_ledger
from .full_info import tune_gains, tune_losses
from .harness import Algorithm, ExperimentConfig, RunResult, compare_to_bound, export, run_experiment
from .regularizers import NumericalFailure, PNormRegularizer, TsallisPotential, bregman_project, logit_map, lp_mirror_map

__version__ = "0.1.0"
