"""Hypothesis test designer: cost-optimal and Neyman-Pearson tests for simple hypotheses."""
