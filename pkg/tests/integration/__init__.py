"""
Integration tests for MTAN Lab: complete training runs and CLI workflows.
"""
