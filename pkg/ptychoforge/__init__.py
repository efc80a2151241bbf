"""
ptychoforge: a desk-scale ptychography lab.

Simulated scans, ePIE phase retrieval, a NumPy encoder/dual-decoder network
that maps single diffraction frames to amplitude and phase, stitching and
quality metrics, and the sparse-sampling, training-size and speed studies.
"""

__version__ = "0.1.0"
