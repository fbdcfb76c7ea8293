"""Memory-augmented spatial-temporal graph autoencoder for node anomaly
detection in dynamic graphs."""

from .config import InjectionConfig, ModelConfig, RunConfig, TrainConfig
from .graph import DynamicGraph, GraphWindow, NodeLabels, Snapshot, extract_window, load_dataset
from .model import StripeModel

__all__ = [
    "DynamicGraph",
    "GraphWindow",
    "InjectionConfig",
    "ModelConfig",
    "NodeLabels",
    "RunConfig",
    "Snapshot",
    "StripeModel",
    "TrainConfig",
    "extract_window",
    "load_dataset",
]

__version__ = "0.1.0"
