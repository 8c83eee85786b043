"""densiprune: activation-density driven structured pruning during training.

Trains small CNNs from scratch on CPU while measuring the fraction of
positive post-ReLU activations per layer, rescales convolution widths by
those densities at saturation points, and accounts for the MAC/parameter
cost of every network along the way.
"""

__version__ = "0.1.0"

from densiprune.backend import BACKEND_NAME

__all__ = ["BACKEND_NAME", "__version__"]
