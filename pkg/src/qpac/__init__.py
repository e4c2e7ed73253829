"""PAC-Bayes generalization bounds for layered quantum-channel models."""

__version__ = "0.1.0"
