"""Goal Tensor CLI - goal-oriented CP and Tucker decompositions of simulation tensors."""

__version__ = "0.1.0"
