# blueprints/__init__.py
"""Net generators: finite-domain tables, segments, registers and the BNN composer."""
