"""Experiment plumbing: config files, CSV logs, checkpoints, plots, manifests, CLI."""
