"""onlinest - simultaneous decoding engine and latency evaluation toolkit."""

__version__ = "0.1.0"
__all__ = ["bridge", "config", "engine", "harness", "metrics", "model", "policy", "runner", "tokenization", "types"]
