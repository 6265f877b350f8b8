"""Semi-supervised NR video quality regression with pairwise pseudo-ranks."""

__version__ = "0.1.0"
