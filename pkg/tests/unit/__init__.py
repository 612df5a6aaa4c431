"""
Unit tests for MTAN Lab.
"""
