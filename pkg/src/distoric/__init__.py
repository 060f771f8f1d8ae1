"""Simulation of a distributed toric surface code built from GHZ protocols.

Subpackages and modules:

``densmat``   density matrices, gates, channels and measurements
``noise``     hardware parameters, Bell pair models and decoherence
``protocols`` protocol trees, recipes, time-tracked execution and search
``superop``   stabilizer-measurement superoperators from Choi states
``toric``     toric-code Monte Carlo with a Union-Find decoder
``fitstats``  threshold fits with confidence intervals
``cli``       command-line driver
"""
__version__ = "0.1.0"
