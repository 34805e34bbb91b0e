"""Alternating tree automata for pairwise reachability of action trees."""

__version__ = "0.1.0"
