# verify/__init__.py
"""State-space exploration, property checks and the verification tiers."""
