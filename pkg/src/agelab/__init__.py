"""Adversarial training laboratory for DQN agents on cart-pole."""

__version__ = "0.1.0"
