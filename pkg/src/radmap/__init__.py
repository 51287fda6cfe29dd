"""Radar-based local terrain mapping: datasets, voxel grids, terrain rasters and evaluation."""

__version__ = "0.1.0"
