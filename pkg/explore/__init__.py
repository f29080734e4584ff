"""Camera exploration: occupancy grids, frontier planning, trajectories and IMU synthesis."""
