from .expansion import alpha_expansion, potts_energy
from .gmm import Gmm, confidence_map, fit_gmm
from .grabcut import grabcut_init
from .graph import (STGraph, build_stgraph, crf_energy, pairwise_weight, spatial_neighbors,
                    superpixel_unaries, temporal_neighbors)
from .maxflow import maxflow
from .slic import SuperpixelMap, slic

__all__ = [
    "Gmm", "STGraph", "SuperpixelMap", "alpha_expansion", "build_stgraph", "confidence_map",
    "crf_energy", "fit_gmm", "grabcut_init", "maxflow", "pairwise_weight", "potts_energy",
    "slic", "spatial_neighbors", "superpixel_unaries", "temporal_neighbors",
]
