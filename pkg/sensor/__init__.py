"""Sensor effects applied to ideal frames: exposure blur, rolling shutter, annotation correction."""
