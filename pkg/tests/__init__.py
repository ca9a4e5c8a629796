"""Tests for goal-tensor-cli."""
