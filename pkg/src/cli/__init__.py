"""
Command-line interface package for DelayLab
"""
