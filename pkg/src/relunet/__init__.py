"""Explicit ReLU network constructions with exact complexity accounting."""

from .network import Layer, Network, NetworkError, depth, num_neurons, num_weights, realize, validate

__all__ = ["Layer", "Network", "NetworkError", "depth", "num_neurons", "num_weights",
           "realize", "validate"]
