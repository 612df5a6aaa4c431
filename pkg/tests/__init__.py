"""
Test package for MTAN Lab.
"""
