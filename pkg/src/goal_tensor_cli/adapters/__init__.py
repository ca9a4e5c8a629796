"""Adapters for files: tensors, meshes, run configurations and reports."""
