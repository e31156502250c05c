"""Response-timing models for spoken dialogue: library and CLI.

Generates naturalistic response-timing offsets for a system utterance
given the user's turn so far. Two model variants share an encoder and an
autoregressive inference network; the variational variant adds a latent
bottleneck whose geometry supports act-conditioned sampling and
interpolation between timing styles.
"""

__version__ = "0.1.0"

from .rng import RngStream, fold_ids  # noqa: F401
from .tensor import Parameter, Tensor, no_grad  # noqa: F401
