"""polfuse: polarization image processing and luminance-aware fusion.

Library surface:

- ``polfuse.autodiff`` / ``polfuse.ops``: the differentiable numeric core
- ``polfuse.stokes`` / ``polfuse.imgio``: Stokes products and image files
- ``polfuse.network``: the fusion network and its configuration
- ``polfuse.losses`` / ``polfuse.metrics``: training objective and the
  evaluation suite
- ``polfuse.dataset`` / ``polfuse.training`` / ``polfuse.cli``: batch harness

Environment flags: ``POLFUSE_NO_NUMBA=1`` selects the pure-numpy kernel
fallback, ``POLFUSE_CHECK_FINITE=1`` enables per-op finite-value checks.
"""

__version__ = "0.1.0"

from .autodiff import Tensor, default_dtype, grad_enabled, no_grad, use_dtype
from .config import RunConfig
from .losses import LossWeights, total_loss
from .metrics import MetricReport, evaluate_pair
from .network import MLSN, NetworkConfig
from .stokes import PolarizationStack, StokesProducts, stokes_from_angles
from .training import TrainResult, train_run

__all__ = [
    "Tensor",
    "no_grad",
    "use_dtype",
    "default_dtype",
    "grad_enabled",
    "RunConfig",
    "LossWeights",
    "total_loss",
    "MetricReport",
    "evaluate_pair",
    "MLSN",
    "NetworkConfig",
    "PolarizationStack",
    "StokesProducts",
    "stokes_from_angles",
    "TrainResult",
    "train_run",
    "__version__",
]
