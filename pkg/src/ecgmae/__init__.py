"""Masked-autoencoder pre-training of a 1-D ConvNeXtV2 for ECG beat classification.

Everything runs on a small numpy autograd (``ecgmae.nn_core``); the
subpackages cover WFDB ingestion, beat preprocessing, the encoder, masked
pre-training, fine-tuning and evaluation.
"""

from .errors import EcgMaeError

__version__ = "0.1.0"

__all__ = ["EcgMaeError", "__version__"]
