"""Tensor-train compressed Fourier pricing and Greeks for multi-asset
European min-call options under correlated lognormal dynamics."""

from .blackscholes import (ModelSpec, bs_call_delta, bs_call_gamma,
                           bs_call_price, bs_call_vega, characteristic_fn,
                           correlation_fixture, payoff_fourier_min_call,
                           psi_delta, psi_gamma, psi_vega)
from .config import RunConfig, load_config
from .cross import BlackBoxTensor, TciConfig, TciDiagnostics, sample_budget, tci_learn
from .grids import (AxisGrid, DiffMatrix, chebyshev_diff_matrix,
                    chebyshev_lobatto_axis, gauss_kronrod_axis)
from .io import load_tensor, save_tensor
from .montecarlo import McConfig, MalliavinContext, mc_greek_fd, mc_price, mv_greeks
from .pipeline import (BuildResult, FlopCounter, GreekTensor, GridSet,
                       PriceTensor, ToleranceSet, build_price_tt, evaluate_at,
                       greeks_an, greeks_nd, interleave_ordering,
                       nd_greek_from_price, reorder_assets)
from .tensor_train import (TensorTrain, TTOperator, apply_matrix_to_core,
                           elementwise_multiply, insert_identity_cores,
                           merge_adjacent_cores, merge_pairs_to_operator,
                           read_ttg, sum_over_axes, svd_truncate, write_ttg)

__version__ = "0.1.0"
