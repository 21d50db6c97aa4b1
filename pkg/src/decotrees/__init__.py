"""Decorated trees, their Hopf-type structure maps, and a grid model that checks the resulting identities."""

from .errors import (
    BasisError,
    BoundsTooLarge,
    ConfigError,
    DecoTreeError,
    KindMismatch,
    NoiseProduct,
    ParseError,
    UnknownTree,
)
from .trees import (
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    derive,
    noise,
    noise_count,
    parse,
    plant,
    poly,
    serialize,
    symmetry_factor,
    tree_product,
    unit,
)
from .algebra import LinComb, PlusMonomial, TensorElem, lift_linear, mult_plus, plus_factor, tilde_basis
from .hopf import (
    antipode,
    coaction,
    coproduct_plus,
    d_xi,
    delta_hat0,
    gamma_hat0,
    project_PI,
    project_Q0,
)

__version__ = "0.1.0"
