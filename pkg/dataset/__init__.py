"""Recipes, train/val splits, COCO export and dataset statistics."""
