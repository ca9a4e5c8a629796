"""Core numerics: tensors, decompositions, QoIs, goal objective and optimizers."""
