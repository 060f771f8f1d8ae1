"""Toric-code lattice, Union-Find decoder and memory-channel Monte Carlo."""
from .decoder import DecodeGraph, decode_union_find, syndrome_graph
from .lattice import PLAQUETTE, STAR, ToricLattice, four_round_schedule, logical_check
from .simulate import (
    SyndromeRecord, count_successes, identity_superoperators, per_round_rate, phenomenological_superoperators,
    run_memory_channel, sample_syndromes,
)

__all__ = [
    "DecodeGraph", "decode_union_find", "syndrome_graph", "PLAQUETTE", "STAR", "ToricLattice",
    "four_round_schedule", "logical_check", "SyndromeRecord", "count_successes", "identity_superoperators",
    "per_round_rate", "phenomenological_superoperators", "run_memory_channel", "sample_syndromes",
]
