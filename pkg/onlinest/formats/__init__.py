"""Binary codecs for feature (SSTF) and weight (SSTM) files."""

from .sstf import read_features, write_features
from .sstm import read_tensors, write_tensors

__all__ = ["read_features", "write_features", "read_tensors", "write_tensors"]
