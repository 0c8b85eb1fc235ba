# misr/__init__.py
