"""Exit identities for spectrally negative Lévy processes with partial resetting.

At the epochs of an independent Poisson process of rate ``lam`` the state is
multiplied by ``p`` in (0, 1).  The package evaluates the Laplace transforms
of the two-sided and one-sided first-passage times through scale functions
and a Picard-iterated resolvent, and cross-checks them against a convolution
representation, the total-resetting limit and Monte Carlo simulation.
"""
from .errors import ConvergenceError, DomainError, PSRError, TruncationError
from .levy_model import Family, ProcessSpec, laplace_exponent, phi
from .scale import (ScaleContext, classical_exit_down, classical_exit_up,
                    one_sided_down_classical, one_sided_up_classical)
from .kernels import KernelHandle, KernelKind
from .resolvent import (GridFunction, Interp, Quadrature, SolveConfig, SolveResult,
                        apply_operator, series_sum, solve_fixed_point)
from .exits import (ExitQuery, ExitValue, Region, Side, direct_exit, evaluate,
                    exit_down_one_sided, exit_down_two_sided, exit_up_one_sided,
                    exit_up_two_sided, region_of, scale_W_p, scale_Z_p)
from .total import (TotalResetContext, ratio_R, total_exit_down, total_exit_one_sided_down,
                    total_exit_one_sided_up, total_exit_up)
from .conv import ConvTable, G_operator, conv_exit_down, conv_exit_up, conv_level, w_n

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DomainError", "PSRError", "TruncationError",
    "Family", "ProcessSpec", "laplace_exponent", "phi",
    "ScaleContext", "classical_exit_down", "classical_exit_up",
    "one_sided_down_classical", "one_sided_up_classical",
    "KernelHandle", "KernelKind",
    "GridFunction", "Interp", "Quadrature", "SolveConfig", "SolveResult",
    "apply_operator", "series_sum", "solve_fixed_point",
    "ExitQuery", "ExitValue", "Region", "Side", "direct_exit", "evaluate",
    "exit_down_one_sided", "exit_down_two_sided", "exit_up_one_sided", "exit_up_two_sided",
    "region_of", "scale_W_p", "scale_Z_p",
    "TotalResetContext", "ratio_R", "total_exit_down", "total_exit_one_sided_down",
    "total_exit_one_sided_up", "total_exit_up",
    "ConvTable", "G_operator", "conv_exit_down", "conv_exit_up", "conv_level", "w_n",
]
