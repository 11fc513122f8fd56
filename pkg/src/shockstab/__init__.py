"""Shock stability laboratory: inviscid and viscous stability of gas-dynamical
shocks with general convex equations of state, plus a rotating model system."""

__version__ = "0.1.0"
