"""Certified evaluation of power-tower sequences and their subsequence limits."""

__version__ = "0.1.0"

from .numerics import Context, ConvergenceError, DomainError, Interval, lambert_w0, lambert_w0_interval
from .towers import BaseSequence, eval_stabilized, eval_tail, eval_tower, eval_with_seed, lambert_tail_seed
from .analysis import (
    InsufficientContraction,
    LimitEnclosure,
    check_dolan_lemmas,
    enclose_subsequence_limit,
    estimate_rate,
    fit_rate,
)
from .certify import (
    Certificate,
    cipra_bounds,
    dolan_certify,
    dolan_F,
    dolan_G,
    lemma3_check,
    replay_certificate,
    shooting_bisect,
    shooting_sequence,
)
from .interpolation import interp_derivative, interp_value, product_diagnostic, smooth_step
from .oeis import BFile, auto_match, compare_digits, fetch_bfile, parse_bfile

__all__ = [
    "BFile", "BaseSequence", "Certificate", "Context", "ConvergenceError", "DomainError",
    "InsufficientContraction", "Interval", "LimitEnclosure", "auto_match", "check_dolan_lemmas",
    "cipra_bounds", "compare_digits", "dolan_F", "dolan_G", "dolan_certify", "enclose_subsequence_limit",
    "estimate_rate", "eval_stabilized", "eval_tail", "eval_tower", "eval_with_seed", "fetch_bfile",
    "fit_rate", "interp_derivative", "interp_value", "lambert_tail_seed", "lambert_w0",
    "lambert_w0_interval", "lemma3_check", "parse_bfile", "product_diagnostic", "replay_certificate",
    "shooting_bisect", "shooting_sequence", "smooth_step",
]
