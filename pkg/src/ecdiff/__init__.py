"""Entity-centric diffusion policy for goal-conditioned multi-object pushing."""

__version__ = "0.1.0"
