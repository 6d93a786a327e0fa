"""dpl: double-polylogarithm sum-formula library.

High-precision evaluation, symbolic partial-fraction rewriting, and regression
verification for sum formulas of Hurwitz-type double polylogarithms, their
character twists, and congruence-restricted variants.
"""

from .specfun import (
    PrecisionContext,
    EvalResult,
    DEFAULT_CTX,
    bernoulli,
    hurwitz_zeta,
    digamma,
    euler_gamma,
    lerch_phi,
    polylog,
    Character,
    make_character,
    gauss_sum,
    dirichlet_L,
    CHI0,
    CHI3,
    CHI4,
    DomainError,
    CharacterError,
)
from .dsl import parse_identity, parse_term, render_identity, render_term
from .termlang import canonicalize, check_derivation, reduce_mixed
from .registry import registry_get, registry_ids, registry_list
from .reduction import XSpec, eval_inner_closed
from .evaluator import (
    IdentityParams,
    IdentityReport,
    eval_double,
    eval_g,
    eval_identity,
    eval_single,
    numeric_derivative_b,
)

__version__ = "0.1.0"
