"""Train small ReLU networks and analyse the linear regions they carve out."""

__version__ = "0.1.0"
