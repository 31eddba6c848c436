"""Closed-form time-inhomogeneous Markov flows for equal-input generator families.

The public surface re-exports the structured algebra, the scalar and matrix
kernels, the closed-form flows and the numeric oracles.
"""

from ._kernels import BACKEND
from .algebra import (
    EqualInputGenerator,
    EqualInputMatrix,
    EqualRowsMatrix,
    ParamVector,
    StructureReport,
    c_product,
    constant_input_generator,
    decompose,
    extremal_vertices,
    q_product,
    recompose,
    spectrum_and_det,
    verify_structure,
)
from .errors import MarkovFlowError
from .families import CommutingFamily, EqualInputFamily, PerturbedFamily
from .flows import (
    FlowResult,
    SignClass,
    bch_log,
    commuting_flow,
    commuting_flow_log,
    det_flow,
    ei_exp,
    ei_flow,
    ei_principal_log,
    perturbed_flow,
    perturbed_log,
    weighted_integral_log,
)
from .oracles import (
    ODEConfig,
    PBSConfig,
    dense_expm,
    dense_logm_principal,
    magnus_residual,
    ode_solve,
    pbs_solve,
    twisted_adjoint_power,
)
from .special import BernoulliTable, KernelKind, MatrixKernel, bernoulli_numbers, kernel_eval, matrix_kernel_eval
from .timefn import Constant, Exponential, Piecewise, Polynomial, Sinusoid, VectorTimeFunction

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EqualInputGenerator",
    "EqualInputMatrix",
    "EqualRowsMatrix",
    "ParamVector",
    "StructureReport",
    "c_product",
    "constant_input_generator",
    "decompose",
    "extremal_vertices",
    "q_product",
    "recompose",
    "spectrum_and_det",
    "verify_structure",
    "MarkovFlowError",
    "CommutingFamily",
    "EqualInputFamily",
    "PerturbedFamily",
    "FlowResult",
    "SignClass",
    "bch_log",
    "commuting_flow",
    "commuting_flow_log",
    "det_flow",
    "ei_exp",
    "ei_flow",
    "ei_principal_log",
    "perturbed_flow",
    "perturbed_log",
    "weighted_integral_log",
    "ODEConfig",
    "PBSConfig",
    "dense_expm",
    "dense_logm_principal",
    "magnus_residual",
    "ode_solve",
    "pbs_solve",
    "twisted_adjoint_power",
    "BernoulliTable",
    "KernelKind",
    "MatrixKernel",
    "bernoulli_numbers",
    "kernel_eval",
    "matrix_kernel_eval",
    "Constant",
    "Exponential",
    "Piecewise",
    "Polynomial",
    "Sinusoid",
    "VectorTimeFunction",
    "__version__",
]
