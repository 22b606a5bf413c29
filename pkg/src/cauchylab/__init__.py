"""Laboratory for studying how quadratic-residual training fails on Cauchy problems."""

from .autodiff import Jet2, ParamGrad, jet_eval
from .mlp import MlpParams, glorot_init, load_mlp, save_mlp

__version__ = "0.1.0"
