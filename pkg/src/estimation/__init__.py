"""
Estimation package for DelayLab
"""
