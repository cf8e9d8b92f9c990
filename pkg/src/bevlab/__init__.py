"""Desk-scale lab for latent BEV grid augmentation on synthetic road scenes.

The package provides a full pipeline: procedural scene generation, a
raster-augmented BEV perception model with configurable gradient stopping,
the matching-based loss stack, Chamfer-AP / IoU metrics, and a latent-space
structure analysis battery (PCA, Silhouette, mutual information, gradient
coverage).
"""

__version__ = "0.1.0"
