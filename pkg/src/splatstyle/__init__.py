"""splatstyle: feed-forward photorealistic style transfer for 3D Gaussian splats."""

__version__ = "0.1.0"
