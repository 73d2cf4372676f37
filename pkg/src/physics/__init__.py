"""
Physics module for DelayLab: spectrum, interferometer forward model, detection datasets
"""
