"""Spectral-cube denoising via hierarchical nonlinear tensor factorization.

Cubes are numpy arrays of shape ``(h, w, b)``: two spatial indices and a
band index.  See :mod:`h2tf.tensor` for the conventions (element order,
circular difference boundaries) the rest of the package builds on.
"""

__version__ = "0.1.0"

from .autograd import (ParamGrads, Tape, backward, finite_diff_grads,
                       forward_with_tape, objective_and_grad)
from .metrics import psnr, ssim
from .model import (H2TFParams, ModelConfig, activation, activation_derivative,
                    default_ranks, forward, hmf_forward, hnt_apply, init_params,
                    make_degenerate)
from .noise import (NoiseSpec, add_deadlines, add_gaussian, add_impulse,
                    add_stripes, make_case)
from .solver import (AdamState, DenoiseResult, DivergenceError, IterationStats,
                     SolverConfig, SolverState, adam_step, run, update_multipliers,
                     update_s, update_v)
from .tensor import (diff_x, diff_x_adjoint, diff_y, diff_y_adjoint, diff_z,
                     diff_z_adjoint, dft_matrix, facewise_product, frontal_slice,
                     inverse_dft_matrix, mode3_product, soft_threshold, tubal_rank)
from .tensorfile import (FormatError, export_band, read_manifest, read_tensor,
                         write_manifest, write_tensor)
