"""Residual Kolmogorov-Arnold networks with exact gadget constructions,
Besov-norm tooling, Sobolev-loss training and statistical bound calculators."""

from .besov import (
    BesovParams,
    SplineExpansion,
    empirical_besov_norm,
    fit_spline_expansion,
    spline_quasi_norm,
    truncate_expansion,
    truncation_level_for,
)
from .gadgets import (
    GadgetSpec,
    assemble_parallel,
    compile_gadget,
    compile_mra_spline,
    compile_multiplier,
    compile_pair_multiplier,
    compile_square,
    compile_tensor_spline,
)
from .modelio import ModelFormatError, deserialize, load, save, serialize
from .network import (
    ActivationMix,
    NetworkStats,
    ResKanLayer,
    ResKanNetwork,
    activation_apply,
    count_stats,
    layer_forward,
    network_forward,
    random_network,
    validate_sparsity,
)
from .splines import (
    DyadicIndex,
    eval_cardinal,
    eval_cardinal_derivative,
    eval_cardinal_oracle,
    eval_mra,
    eval_tensor,
)

__version__ = "0.1.0"
