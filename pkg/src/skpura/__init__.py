"""MIMO unsourced random access with sparse Kronecker-product coding.

Encoders, channel simulation, the Bayesian iterative receiver, the PUPE
performance limit, and a batch experiment harness.
"""

__version__ = "0.1.0"

from .config import CONSTELLATION, S_REF, SkpConfig, preset  # noqa: F401
