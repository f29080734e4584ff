"""Randomized scenes: environments, animated assets, placement and flying objects."""
