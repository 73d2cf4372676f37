"""
Information package for DelayLab
"""
