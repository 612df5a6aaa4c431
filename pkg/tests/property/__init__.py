"""
Property-based tests for MTAN Lab.
"""
