# bnn/__init__.py
"""Reference binary neural network and the binary32 arithmetic it shares with the net."""
