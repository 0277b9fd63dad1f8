"""Full waveform inversion of the scalar wave equation on regular 2D/3D grids.

Gradient engines: continuous adjoint (Frechet kernel), exact reverse sweep
through the discrete solver, and a generator-network ansatz chained onto
either of them.  The stencil kernels are compiled when the extension is
available and fall back to numpy otherwise (see :mod:`hybridfwi.kernels`).
"""
from .grid import Grid, MaterialModel, ScalarField, TimeAxis, clip_indicator, field_mse, make_grid
from .forward import SensorArray, ShotRecord, SourceSpec, propagate, run_forward, sine_burst, step_wavefield
from .adjoint import ResidualRecord, frechet_kernel, measurement_loss, run_adjoint
from .backprop import backprop_through_solver, loss_and_gradient
from .ansatz import ConstantAnsatz, eval_constant, gradient_wrt_coeffs
from .network import GeneratorNetwork, glorot_init, network_backward, network_forward
from .optim import AdamState, adam_step, clip_gradient, lr_schedule
from .data import Problem, Void, build_phantom, desk_problem, make_reference_data
from .inversion import (TrainConfig, TrainingHistory, full_domain_pinn_invert, invert,
                        normalized_mse, sharpness_metric, wavefield_problem)
from .kernels import backend, use_backend

__version__ = "0.1.0"
