# analyze/__init__.py
