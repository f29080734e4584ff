"""Command line orchestration: generate experiments, assemble recipes, evaluate predictions."""
