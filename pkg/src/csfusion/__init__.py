"""Fuse per-frame 2D semantic masks of posed RGB-D sequences into 3D point labels."""

__version__ = "0.1.0"
