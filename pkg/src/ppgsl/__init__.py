"""Privacy-preserving graph structure learning against sensitive link inference."""

__version__ = "0.1.0"
