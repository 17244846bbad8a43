"""
Test suite for transdim.
"""
