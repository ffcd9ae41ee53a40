# engine/__init__.py
"""Token-game simulation, instrument decoding and the lockstep harness."""
