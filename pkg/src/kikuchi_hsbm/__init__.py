"""Spectral detection in p-marginal hypergraph stochastic block models via Kikuchi matrices."""

__version__ = "0.1.0"
