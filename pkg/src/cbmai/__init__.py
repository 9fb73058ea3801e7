"""Fixed-budget identification of the best mixed arm under expected-cost constraints."""

from .algorithms import Identification, pull_schedule, sfsr_run, uslp_run
from .catalog import builtin_instance, generate
from .lp import StandardLp, build_standard_form, solve_primal
from .model import Instance, load_instance, save_instance, true_optimum

__all__ = [
    "Identification",
    "Instance",
    "StandardLp",
    "build_standard_form",
    "builtin_instance",
    "generate",
    "load_instance",
    "pull_schedule",
    "save_instance",
    "sfsr_run",
    "solve_primal",
    "true_optimum",
    "uslp_run",
]
