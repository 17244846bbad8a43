"""
Model family tests.
"""
