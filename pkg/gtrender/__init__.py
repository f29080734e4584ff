"""Per-frame geometric ground truth rendered by ray casting."""
