"""Uniform tail bounds for normed sums of heavy-tailed random variables.

Tail models, the addition ``psi(t) = 1 - Re E exp(i t xi)`` and its envelope,
norming sequences, bound curves for every tail regime, a seeded simulator
that checks them, random-field entropy tools and confidence intervals.
"""

from .tailmodel import Regime, SampleBatch, SlowlyVarying, TailModel, classify, moment_norm, quantile, sample, tail_eval
from .charfn import MonotonicityClass, PsiBar, PsiFunction, classify_mi_md, psi_asymptotic, psi_bar_eval, psi_eval
from .norming import NormingSequence, Provenance, b_asymptotic, b_superheavy, log_b_superheavy, solve_b
from .glspace import NuFunction, gl_norm, natural_nu, orlicz_weight_norm, tail_from_nu
from .bounds import BoundCurve, BoundValidityError, rosenthal, tail_from_moments
from .simulate import EmpiricalTail, StableLaw, SumExperiment, make_gap_fixture, run_sums, verify_bound
from .fields import GridSpace, covering_numbers, entropy_integral, natural_distance, uniform_tail_bound
from .app import CiReport, ci_mean, location_estimate, solve_X

__version__ = "0.1.0"
