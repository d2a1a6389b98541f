"""CSI fingerprinting with per-location deep autoencoders.

Train one autoencoder per surveyed reference location on CSI amplitudes,
then locate a device by Bayesian fusion of reconstruction likelihoods.
"""
from .csi import CsiPacket, NormalizationParams
from .deepnet import FingerprintModel, NetShape, TrainConfig, train_location
from .errors import DeepFiError
from .locator import BatchConfig, FingerprintDatabase, LocationEstimate, estimate
from .pipeline import train_database

__version__ = "0.1.0"

__all__ = [
    "BatchConfig",
    "CsiPacket",
    "DeepFiError",
    "FingerprintDatabase",
    "FingerprintModel",
    "LocationEstimate",
    "NetShape",
    "NormalizationParams",
    "TrainConfig",
    "estimate",
    "train_database",
    "train_location",
]
