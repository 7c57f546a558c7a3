"""Weighted low-rank bases for Gaussian Markov random fields on mesh graphs."""
from ._accel import backend_name
from .mesh import MeshGraph, SparseSpdMatrix, build_precision, graph_distance, load_mesh
from .samples import FieldSamples
from .weights import WeightVector

__version__ = "0.1.0"

__all__ = [
    "FieldSamples",
    "MeshGraph",
    "SparseSpdMatrix",
    "WeightVector",
    "backend_name",
    "build_precision",
    "graph_distance",
    "load_mesh",
]
